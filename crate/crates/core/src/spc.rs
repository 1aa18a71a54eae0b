//! Subtour Partition Cover for singleton instances with an empty backbone:
//! a (2,0)-light construction by rounding the LP circulation through
//! per-class auxiliary vertices.

use crate::ensure_stage;
use crate::error::{AtspError, Result};
use crate::graph::{eulerian_components, shortest_path, EdgeMultiset, Subtour};
use crate::instance::Instance;
use crate::mcf::{min_cost_integral_flow, FlowNetwork};
use crate::ratio::{rint, Rat};
use crate::vset::VSet;
use num_traits::Zero;

/// An algorithm for Subtour Partition Cover: given an instance, a backbone
/// subtour, and a partition of the unvisited vertices into strongly
/// connected classes, produce an Eulerian multiset crossing every class.
pub trait SpcOracle {
    fn solve(&self, i: &Instance, b: &Subtour, partition: &[VSet]) -> Result<EdgeMultiset>;
    fn name(&self) -> &str;
}

/// The (2,0)-light oracle for singleton instances with B = empty.
pub struct SingletonSpc;

impl SpcOracle for SingletonSpc {
    fn solve(&self, i: &Instance, b: &Subtour, partition: &[VSet]) -> Result<EdgeMultiset> {
        ensure_stage!(
            b.is_empty(),
            "spc.singleton",
            "singleton oracle requires an empty backbone"
        );
        solve_spc_singleton(i, partition)
    }

    fn name(&self) -> &str {
        "singleton-spc"
    }
}

/// Working copy of the instance edges; splitting produces fresh entries
/// whose `base` keeps pointing at the instance edge.
#[derive(Clone, Debug)]
struct WEdge {
    base: usize,
    tail: usize,
    head: usize,
    x: Rat,
    /// Class whose X^- holds this edge (redirect head), if any.
    minus_of: Option<usize>,
    /// Class whose X^+ holds this edge (redirect tail), if any.
    plus_of: Option<usize>,
}

fn validate_partition(i: &Instance, b_vertices: &VSet, partition: &[VSet]) -> Result<()> {
    let n = i.n();
    let mut seen = VSet::empty(n);
    for (ci, class) in partition.iter().enumerate() {
        if class.is_empty() {
            return Err(AtspError::InvalidPartition(format!("class {ci} empty")));
        }
        if class.len() == n {
            return Err(AtspError::InvalidPartition(
                "partition class equals V".into(),
            ));
        }
        if class.intersects(&seen) {
            return Err(AtspError::InvalidPartition(format!(
                "class {ci} overlaps an earlier class"
            )));
        }
        if class.intersects(b_vertices) {
            return Err(AtspError::InvalidPartition(format!(
                "class {ci} touches the backbone"
            )));
        }
        seen = seen.union(class);
        let comps = crate::graph::scc_topological(&i.g, class)?;
        if comps.len() != 1 {
            return Err(AtspError::InvalidPartition(format!(
                "class {ci} not strongly connected"
            )));
        }
    }
    let expected = b_vertices.complement();
    if seen != expected {
        return Err(AtspError::InvalidPartition(
            "classes do not cover V minus the backbone".into(),
        ));
    }
    Ok(())
}

/// Deterministic cycle decomposition by walk-stripping: always start from
/// and continue on the lowest-index edge with remaining value.
fn cycle_decomposition(edges: &[WEdge], n: usize) -> Vec<(Vec<usize>, Rat)> {
    let mut residual: Vec<Rat> = edges.iter().map(|e| e.x.clone()).collect();
    let mut out_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, e) in edges.iter().enumerate() {
        out_adj[e.tail].push(idx);
    }
    let mut cycles = Vec::new();
    loop {
        let Some(start) = (0..edges.len()).find(|&idx| residual[idx] > Rat::zero()) else {
            break;
        };
        let mut path: Vec<usize> = vec![start];
        let mut at = edges[start].head;
        // Position of each vertex as the tail of path[j].
        let mut tails: Vec<Option<usize>> = vec![None; n];
        tails[edges[start].tail] = Some(0);
        let cycle;
        loop {
            if let Some(j) = tails[at] {
                cycle = path[j..].to_vec();
                break;
            }
            tails[at] = Some(path.len());
            let next = out_adj[at]
                .iter()
                .copied()
                .find(|&idx| residual[idx] > Rat::zero())
                .expect("circulation has an outgoing edge");
            path.push(next);
            at = edges[next].head;
        }
        let lambda = cycle
            .iter()
            .map(|&idx| residual[idx].clone())
            .min()
            .expect("nonempty cycle");
        for &idx in &cycle {
            residual[idx] -= &lambda;
        }
        cycles.push((cycle, lambda));
    }
    cycles
}

/// The (2,0)-light Subtour Partition Cover construction for singleton
/// instances: route one unit of each class's incoming flow through an
/// auxiliary vertex, round to an integral circulation with out-degree caps,
/// map back, and close the per-class gap with one inside walk.
pub fn solve_spc_singleton(i: &Instance, partition: &[VSet]) -> Result<EdgeMultiset> {
    ensure_stage!(
        i.is_singleton(),
        "spc.singleton",
        "instance is not a singleton instance"
    );
    let n = i.n();
    validate_partition(i, &VSet::empty(n), partition)?;
    let k = partition.len();

    let mut edges: Vec<WEdge> = i
        .g
        .edges()
        .iter()
        .map(|e| WEdge {
            base: e.id,
            tail: e.tail,
            head: e.head,
            x: i.x[e.id].clone(),
            minus_of: None,
            plus_of: None,
        })
        .collect();

    // X_i^-: greedy prefix of incoming edges in index order, splitting the
    // last edge to hit x-mass exactly 1.
    for (ci, class) in partition.iter().enumerate() {
        let mut need = rint(1);
        let mut idx = 0;
        while need > Rat::zero() {
            ensure_stage!(
                idx < edges.len(),
                "spc.singleton",
                "x(delta^-(V_{ci})) < 1; infeasible x"
            );
            let (is_in, xval) = {
                let e = &edges[idx];
                (
                    class.contains(e.head) && !class.contains(e.tail),
                    e.x.clone(),
                )
            };
            if !is_in || xval.is_zero() {
                idx += 1;
                continue;
            }
            if xval <= need {
                edges[idx].minus_of = Some(ci);
                need -= xval;
            } else {
                // Split: the first part carries exactly the missing mass.
                let rest = &xval - &need;
                edges[idx].x = need.clone();
                edges[idx].minus_of = Some(ci);
                let mut twin = edges[idx].clone();
                twin.x = rest;
                twin.minus_of = None;
                edges.push(twin);
                need = Rat::zero();
            }
            idx += 1;
        }
    }

    // Follow the cycle decomposition from each X_i^- edge to its first exit
    // from the class; the traversed interior flow is subtracted and the
    // exit mass is redirected.
    let cycles = cycle_decomposition(&edges, n);
    let mut subtract: Vec<Rat> = vec![Rat::zero(); edges.len()];
    let mut exit_mass: Vec<Rat> = vec![Rat::zero(); edges.len()];
    for (cycle, lambda) in &cycles {
        for (pos, &eidx) in cycle.iter().enumerate() {
            let Some(ci) = edges[eidx].minus_of else {
                continue;
            };
            let class = &partition[ci];
            // Walk forward to the first edge leaving the class.
            let mut q = (pos + 1) % cycle.len();
            loop {
                let f = cycle[q];
                let fe = &edges[f];
                if class.contains(fe.tail) && !class.contains(fe.head) {
                    exit_mass[f] += lambda;
                    break;
                }
                ensure_stage!(
                    class.contains(fe.tail) && class.contains(fe.head),
                    "spc.singleton",
                    "cycle left the class without an exit edge"
                );
                subtract[f] += lambda;
                q = (q + 1) % cycle.len();
            }
        }
    }
    // Exit edges enter X_i^+ for the class of their tail; split off the
    // portion that exceeds the followed mass.
    let m_now = edges.len();
    for idx in 0..m_now {
        if exit_mass[idx].is_zero() {
            continue;
        }
        let ci = partition
            .iter()
            .position(|c| c.contains(edges[idx].tail))
            .expect("exit edge starts in a class");
        ensure_stage!(
            exit_mass[idx] <= edges[idx].x,
            "spc.singleton",
            "exit mass exceeds edge value"
        );
        if exit_mass[idx] == edges[idx].x {
            edges[idx].plus_of = Some(ci);
        } else {
            let rest = &edges[idx].x - &exit_mass[idx];
            edges[idx].x = exit_mass[idx].clone();
            edges[idx].plus_of = Some(ci);
            let mut twin = edges[idx].clone();
            twin.x = rest;
            twin.plus_of = None;
            edges.push(twin);
            subtract.push(Rat::zero());
        }
    }

    // x' on the auxiliary graph: redirect and subtract.
    let n_aux = n + k;
    let aux = |ci: usize| n + ci;
    let exit_sum: Vec<Rat> = (0..k)
        .map(|ci| {
            let mut t = Rat::zero();
            for (idx, e) in edges.iter().enumerate() {
                if e.plus_of == Some(ci) {
                    t += &e.x;
                    let _ = idx;
                }
            }
            t
        })
        .collect();
    for (ci, s) in exit_sum.iter().enumerate() {
        ensure_stage!(
            *s == rint(1),
            "spc.singleton",
            "x(X^+_{ci}) = {s}, expected 1"
        );
    }
    struct AuxEdge {
        widx: usize,
        tail: usize,
        head: usize,
        x: Rat,
    }
    let mut aux_edges: Vec<AuxEdge> = Vec::new();
    for (idx, e) in edges.iter().enumerate() {
        let xv = &e.x - &subtract[idx];
        ensure_stage!(
            xv >= Rat::zero(),
            "spc.singleton",
            "oversubtracted interior flow"
        );
        if xv.is_zero() {
            continue;
        }
        let tail = match e.plus_of {
            Some(ci) => aux(ci),
            None => e.tail,
        };
        let head = match e.minus_of {
            Some(ci) => aux(ci),
            None => e.head,
        };
        aux_edges.push(AuxEdge {
            widx: idx,
            tail,
            head,
            x: xv,
        });
    }
    // Sanity: x' is a circulation with unit flow through each auxiliary
    // vertex and capped outflow at weighted vertices.
    {
        let mut bal = vec![Rat::zero(); n_aux];
        let mut outflow = vec![Rat::zero(); n_aux];
        for e in &aux_edges {
            bal[e.tail] += &e.x;
            bal[e.head] -= &e.x;
            outflow[e.tail] += &e.x;
        }
        for v in 0..n_aux {
            ensure_stage!(bal[v].is_zero(), "spc.singleton", "x' unbalanced at {v}");
        }
        for ci in 0..k {
            ensure_stage!(
                outflow[aux(ci)] == rint(1),
                "spc.singleton",
                "x'(delta^+(a_{ci})) != 1"
            );
        }
        for v in 0..n {
            if i.lb(v) > Rat::zero() {
                ensure_stage!(
                    outflow[v] <= rint(1),
                    "spc.singleton",
                    "x'(delta^+({v})) > 1 at a weighted vertex"
                );
            }
        }
    }

    // Integral circulation with the same degree bounds, minimizing induced
    // weight: vertex-split reduction to min-cost integral flow.
    let net_n = 2 * n_aux;
    let vin = |v: usize| 2 * v;
    let vout = |v: usize| 2 * v + 1;
    let mut net = FlowNetwork::new(net_n);
    for v in 0..n_aux {
        let (lo, hi) = if v >= n {
            (1, Some(1))
        } else if i.lb(v) > Rat::zero() {
            (0, Some(1))
        } else {
            (0, None)
        };
        net.add_arc(vin(v), vout(v), lo, hi, Rat::zero());
    }
    let mut arc_of: Vec<(usize, usize)> = Vec::new(); // (net arc, widx)
    for e in &aux_edges {
        let cost = i.weight(edges[e.widx].base).clone();
        let a = net.add_arc(vout(e.tail), vin(e.head), 0, None, cost);
        arc_of.push((a, e.widx));
    }
    let flow = min_cost_integral_flow(&net).map_err(|err| match err {
        AtspError::FlowInfeasible(cut) => AtspError::Assertion {
            stage: "spc.singleton".into(),
            detail: format!("integral circulation infeasible; cut {cut:?}"),
            dump: None,
        },
        other => other,
    })?;

    // z' per work edge; map back to instance edges.
    let mut z: Vec<i64> = vec![0; edges.len()];
    for (a, widx) in &arc_of {
        z[*widx] += flow[*a];
    }
    let mut f = EdgeMultiset::new();
    for (idx, e) in edges.iter().enumerate() {
        if z[idx] > 0 {
            f.add(e.base, z[idx] as u64);
        }
    }
    // Repair: the class's unit visit to a_i maps back to a head u_i and a
    // tail v_i inside the class; connect u_i -> v_i by a walk inside V_i.
    for ci in 0..k {
        let mut u_i = None;
        let mut v_i = None;
        for (idx, e) in edges.iter().enumerate() {
            if z[idx] <= 0 {
                continue;
            }
            if e.minus_of == Some(ci) {
                ensure_stage!(u_i.is_none(), "spc.singleton", "a_{ci} entered twice");
                u_i = Some(e.head);
            }
            if e.plus_of == Some(ci) {
                ensure_stage!(v_i.is_none(), "spc.singleton", "a_{ci} left twice");
                v_i = Some(e.tail);
            }
        }
        let (u_i, v_i) = (
            u_i.ok_or_else(|| AtspError::Assertion {
                stage: "spc.singleton".into(),
                detail: format!("no unit in-edge at a_{ci}"),
                dump: None,
            })?,
            v_i.ok_or_else(|| AtspError::Assertion {
                stage: "spc.singleton".into(),
                detail: format!("no unit out-edge at a_{ci}"),
                dump: None,
            })?,
        );
        if u_i != v_i {
            let (path, _) = shortest_path(&i.g, i.weights(), u_i, v_i, &partition[ci])
                .ok_or_else(|| AtspError::Assertion {
                    stage: "spc.singleton".into(),
                    detail: "class not strongly connected after validation".into(),
                    dump: None,
                })?;
            for e in path {
                f.add(e, 1);
            }
        }
    }

    audit_singleton_output(i, partition, &f)?;
    Ok(f)
}

/// Checks the construction contract: Eulerian, crosses every class, capped
/// out-degrees, and exact (2,0)-lightness per subtour.
fn audit_singleton_output(i: &Instance, partition: &[VSet], f: &EdgeMultiset) -> Result<()> {
    let subs = eulerian_components(&i.g, f)?;
    for (ci, class) in partition.iter().enumerate() {
        ensure_stage!(
            f.delta_plus_count(&i.g, class) >= 1,
            "spc.singleton",
            "output does not cross class {ci}"
        );
    }
    for v in 0..i.n() {
        if i.lb(v) > Rat::zero() {
            let vs = VSet::from_iter(i.n(), [v]);
            ensure_stage!(
                f.delta_plus_count(&i.g, &vs) <= 2,
                "spc.singleton",
                "out-degree cap violated at {v}"
            );
        }
    }
    let two = rint(2);
    for t in &subs {
        let w = i.cost_subtour(t);
        let lb = i.lb_set(&t.vertices(&i.g));
        ensure_stage!(
            w <= &two * &lb,
            "spc.singleton",
            "subtour breaks (2,0)-lightness: w = {w}, lb = {lb}"
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heldkarp::{extract_laminar_dual, solve_held_karp};
    use crate::instance::build_instance;
    use crate::gen;

    fn k3_instance() -> Instance {
        let mut g = crate::graph::Digraph::new(3);
        let mut w = Vec::new();
        for u in 0..3 {
            for v in 0..3 {
                if u != v {
                    g.add_edge(u, v, None);
                    w.push(rint(1));
                }
            }
        }
        let hk = solve_held_karp(&g, &w).unwrap();
        let dual = extract_laminar_dual(&g, &w, &hk).unwrap();
        build_instance(&g, &w, &hk, &dual).unwrap()
    }

    #[test]
    fn k3_three_singleton_classes() {
        let i = k3_instance();
        let classes: Vec<VSet> = (0..3).map(|v| VSet::from_iter(3, [v])).collect();
        let f = solve_spc_singleton(&i, &classes).unwrap();
        // One directed 3-cycle: every out-degree is exactly 1.
        for v in 0..3 {
            let vs = VSet::from_iter(3, [v]);
            assert_eq!(f.delta_plus_count(&i.g, &vs), 1);
        }
        let subs = eulerian_components(&i.g, &f).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(i.cost(&f), rint(3));
    }

    #[test]
    fn degenerate_class_rejected() {
        let i = k3_instance();
        let classes = vec![VSet::full(3)];
        assert!(matches!(
            solve_spc_singleton(&i, &classes),
            Err(AtspError::InvalidPartition(_))
        ));
    }

    #[test]
    fn series_scc_pairs() {
        // The series gadget is not singleton, so it must be rejected.
        let i = gen::series_scc().unwrap();
        let classes: Vec<VSet> = (0..6).map(|v| VSet::from_iter(6, [v])).collect();
        assert!(solve_spc_singleton(&i, &classes).is_err());
    }

    #[test]
    fn random_singleton_instances_light() {
        // Random node-weighted instances become singleton instances after
        // the Held-Karp reduction whenever the extracted laminar dual is
        // all-singleton; exercise those with random partitions.
        let mut tested = 0;
        for seed in 0..40u64 {
            let n = 4 + (seed % 4) as usize;
            let (g, w) = gen::node_weighted_instance(n, seed);
            let hk = solve_held_karp(&g, &w).unwrap();
            let dual = extract_laminar_dual(&g, &w, &hk).unwrap();
            let inst = build_instance(&g, &w, &hk, &dual).unwrap();
            if !inst.is_singleton() {
                continue;
            }
            tested += 1;
            // Partition: singleton classes.
            let classes: Vec<VSet> =
                (0..inst.n()).map(|v| VSet::from_iter(inst.n(), [v])).collect();
            let f = solve_spc_singleton(&inst, &classes).unwrap();
            assert!(!f.is_empty());
        }
        assert!(tested >= 5, "too few singleton instances generated: {tested}");
    }
}
