//! Python bindings: the main solver entry points with rationals passed as
//! "p/q" strings and structured results as JSON.

use atsp_core::error::AtspError;
use atsp_core::gen::{self, GenKind};
use atsp_core::graph::{Digraph, EdgeMultiset};
use atsp_core::heldkarp::{extract_laminar_dual, solve_held_karp};
use atsp_core::io;
use atsp_core::pipeline::{approx_atsp, brute_force_atsp, verify_tour, SolverConfig};
use atsp_core::ratio::{rat_from_string, rat_to_string, Rat};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

type PyEdges = Vec<(usize, usize, String)>;

fn to_err(e: AtspError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn build_graph(n: usize, edges: &PyEdges) -> PyResult<(Digraph, Vec<Rat>)> {
    let mut g = Digraph::new(n);
    let mut w = Vec::new();
    for (tail, head, weight) in edges {
        if *tail >= n || *head >= n {
            return Err(PyValueError::new_err(format!(
                "edge ({tail}, {head}) out of range for n = {n}"
            )));
        }
        g.add_edge(*tail, *head, None);
        w.push(rat_from_string(weight).map_err(to_err)?);
    }
    Ok((g, w))
}

fn config(epsilon: Option<&str>, delta: Option<&str>) -> PyResult<SolverConfig> {
    let mut cfg = SolverConfig::default();
    if let Some(e) = epsilon {
        cfg.epsilon = rat_from_string(e).map_err(to_err)?;
    }
    if let Some(d) = delta {
        cfg.delta = rat_from_string(d).map_err(to_err)?;
    }
    cfg.validate().map_err(to_err)?;
    Ok(cfg)
}

/// Generate a seeded instance; returns (n, [(tail, head, weight)]).
#[pyfunction]
#[pyo3(signature = (kind, n, seed=0))]
fn generate(kind: &str, n: usize, seed: u64) -> PyResult<(usize, PyEdges)> {
    let k = GenKind::parse(kind).map_err(to_err)?;
    let (g, w) = gen::generate(k, n, seed).map_err(to_err)?;
    let edges = g
        .edges()
        .iter()
        .map(|e| (e.tail, e.head, rat_to_string(&w[e.id])))
        .collect();
    Ok((g.n(), edges))
}

/// Parse a TSPLIB ATSP or native JSON instance file.
#[pyfunction]
fn parse_instance(text: &str) -> PyResult<(usize, PyEdges)> {
    let (g, w) = io::parse_instance(text).map_err(to_err)?;
    let edges = g
        .edges()
        .iter()
        .map(|e| (e.tail, e.head, rat_to_string(&w[e.id])))
        .collect();
    Ok((g.n(), edges))
}

/// Full solve; returns the report as a JSON string with exact rationals.
#[pyfunction]
#[pyo3(signature = (n, edges, epsilon=None, delta=None))]
fn solve(
    n: usize,
    edges: PyEdges,
    epsilon: Option<&str>,
    delta: Option<&str>,
) -> PyResult<String> {
    let (g, w) = build_graph(n, &edges)?;
    let cfg = config(epsilon, delta)?;
    let rep = approx_atsp(&g, &w, &cfg).map_err(to_err)?;
    let out = serde_json::json!({
        "hk_value": rat_to_string(&rep.hk_value),
        "weight": rat_to_string(&rep.weight),
        "ratio": rat_to_string(&rep.ratio),
        "ratio_bound": rat_to_string(&rep.ratio_bound),
        "tour_walk": rep.tour.walk,
        "stats": {
            "lp_pivots": rep.stats.lp_pivots,
            "merge_rounds": rep.stats.merge_rounds,
            "merge_reinits": rep.stats.merge_reinits,
            "oracle_calls": rep.stats.oracle_calls,
        },
    });
    Ok(out.to_string())
}

/// Held-Karp lower bound; returns (value, [x per edge]).
#[pyfunction]
fn held_karp(n: usize, edges: PyEdges) -> PyResult<(String, Vec<String>)> {
    let (g, w) = build_graph(n, &edges)?;
    let hk = solve_held_karp(&g, &w).map_err(to_err)?;
    Ok((
        rat_to_string(&hk.value),
        hk.x.iter().map(rat_to_string).collect(),
    ))
}

/// Uncrossed laminar dual as JSON: objective, alpha, family.
#[pyfunction]
fn laminar_dual(n: usize, edges: PyEdges) -> PyResult<String> {
    let (g, w) = build_graph(n, &edges)?;
    let hk = solve_held_karp(&g, &w).map_err(to_err)?;
    let dual = extract_laminar_dual(&g, &w, &hk).map_err(to_err)?;
    let out = serde_json::json!({
        "objective": rat_to_string(&dual.objective),
        "alpha": dual.alpha.iter().map(rat_to_string).collect::<Vec<_>>(),
        "family": dual.family.iter().map(|(s, y)| serde_json::json!({
            "vertices": s.to_vec(),
            "y": rat_to_string(y),
        })).collect::<Vec<_>>(),
    });
    Ok(out.to_string())
}

/// Exact optimum for n <= 10; returns (value, [(edge index, multiplicity)]).
#[pyfunction]
fn brute_force(n: usize, edges: PyEdges) -> PyResult<(String, Vec<(usize, u64)>)> {
    let (g, w) = build_graph(n, &edges)?;
    let (opt, tour) = brute_force_atsp(&g, &w).map_err(to_err)?;
    Ok((rat_to_string(&opt), tour.iter().collect()))
}

/// Validate a tour given as (edge index, multiplicity) pairs; returns the
/// list of violations (empty when the tour is valid).
#[pyfunction]
fn check_tour(n: usize, edges: PyEdges, tour: Vec<(usize, u64)>) -> PyResult<Vec<String>> {
    let (g, _) = build_graph(n, &edges)?;
    let mut f = EdgeMultiset::new();
    for (e, k) in tour {
        if e >= g.m() {
            return Err(PyValueError::new_err(format!("edge index {e} out of range")));
        }
        f.add(e, k);
    }
    Ok(match verify_tour(&g, &f) {
        Ok(()) => Vec::new(),
        Err(v) => v,
    })
}

/// A named laminarly-weighted gadget as instance JSON.
#[pyfunction]
fn gadget(name: &str) -> PyResult<String> {
    let kind = GenKind::parse(name).map_err(to_err)?;
    match kind {
        GenKind::Gadget(id) => Ok(gen::gadget_instance(id).map_err(to_err)?.to_json()),
        _ => Err(PyValueError::new_err(format!("`{name}` is not a gadget"))),
    }
}

#[pymodule]
fn atsp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(parse_instance, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(held_karp, m)?)?;
    m.add_function(wrap_pyfunction!(laminar_dual, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(check_tour, m)?)?;
    m.add_function(wrap_pyfunction!(gadget, m)?)?;
    Ok(())
}
