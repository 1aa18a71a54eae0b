//! Laminarly-weighted ATSP instances: the universal currency between the
//! reduction stages. An instance is (G, L, x, y) with positive x on every
//! edge, every laminar set tight, and edge weights induced by the y-mass of
//! crossed sets.

use crate::error::{AtspError, Result};
use crate::graph::{Digraph, EdgeMultiset, Subtour};
use crate::heldkarp::{DualSolution, HeldKarpSolution};
use crate::maxflow::min_st_cut;
use crate::ratio::{rat_from_string, rat_to_string, rint, Rat};
use crate::vset::VSet;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

/// The nested family L stored as a forest by inclusion, with per-set dual
/// values. Set ids are stable; vertex sets iterate in ascending order.
#[derive(Clone, Debug)]
pub struct LaminarForest {
    sets: Vec<LamSet>,
}

#[derive(Clone, Debug)]
pub struct LamSet {
    pub id: usize,
    pub vset: VSet,
    pub y: Rat,
    /// Smallest strict superset within the family, if any.
    pub parent: Option<usize>,
}

impl LaminarForest {
    /// Builds a forest from (set, y) pairs. Requires laminarity and y > 0.
    pub fn new(mut family: Vec<(VSet, Rat)>) -> Result<Self> {
        family.sort_by(|a, b| {
            b.0.len()
                .cmp(&a.0.len())
                .then_with(|| a.0.cmp(&b.0))
        });
        for i in 0..family.len() {
            if family[i].1 <= Rat::zero() {
                return Err(AtspError::InstanceViolation(
                    "laminar set with nonpositive y".into(),
                ));
            }
            for j in i + 1..family.len() {
                if !family[i].0.laminar_with(&family[j].0) {
                    return Err(AtspError::InstanceViolation(format!(
                        "sets {:?} and {:?} cross",
                        family[i].0, family[j].0
                    )));
                }
                if family[i].0 == family[j].0 {
                    return Err(AtspError::InstanceViolation("duplicate laminar set".into()));
                }
            }
        }
        // Sorted by decreasing size, so a set's parent appears before it.
        let mut sets: Vec<LamSet> = Vec::with_capacity(family.len());
        for (id, (vset, y)) in family.into_iter().enumerate() {
            let parent = sets
                .iter()
                .rev()
                .filter(|c| vset.is_subset(&c.vset) && vset != c.vset)
                .min_by_key(|c| c.vset.len())
                .map(|c| c.id);
            sets.push(LamSet {
                id,
                vset,
                y,
                parent,
            });
        }
        Ok(LaminarForest { sets })
    }

    pub fn sets(&self) -> &[LamSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, id: usize) -> &LamSet {
        &self.sets[id]
    }

    /// y_v convention: 0 when {v} is not in the family.
    pub fn y_vertex(&self, v: usize) -> Rat {
        self.sets
            .iter()
            .find(|s| s.vset.len() == 1 && s.vset.contains(v))
            .map(|s| s.y.clone())
            .unwrap_or_else(Rat::zero)
    }

    pub fn non_singletons(&self) -> impl Iterator<Item = &LamSet> {
        self.sets.iter().filter(|s| s.vset.len() >= 2)
    }

    /// Maximal sets: those without a parent.
    pub fn maximal(&self) -> impl Iterator<Item = &LamSet> {
        self.sets.iter().filter(|s| s.parent.is_none())
    }
}

/// A laminarly-weighted ATSP instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub g: Digraph,
    pub laminar: LaminarForest,
    /// Positive LP value per edge.
    pub x: Vec<Rat>,
    /// Cached induced weights w_I(e) = sum of y over sets crossed by e.
    w: Vec<Rat>,
}

impl Instance {
    pub fn new(g: Digraph, laminar: LaminarForest, x: Vec<Rat>) -> Result<Self> {
        if x.len() != g.m() {
            return Err(AtspError::InstanceViolation(
                "x vector length differs from edge count".into(),
            ));
        }
        let w = induced_weights(&g, &laminar);
        Ok(Instance { g, laminar, x, w })
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    /// Induced weight of a single edge.
    pub fn weight(&self, e: usize) -> &Rat {
        &self.w[e]
    }

    pub fn weights(&self) -> &[Rat] {
        &self.w
    }

    pub fn cost(&self, f: &EdgeMultiset) -> Rat {
        f.cost(&self.w)
    }

    pub fn cost_subtour(&self, t: &Subtour) -> Rat {
        self.cost(&t.edges)
    }

    /// value_I(S) = 2 * sum of y over laminar sets strictly inside S.
    pub fn value(&self, s: &VSet) -> Rat {
        let mut v = Rat::zero();
        for ls in self.laminar.sets() {
            if ls.vset.is_subset(s) && ls.vset != *s {
                v += &ls.y;
            }
        }
        rint(2) * v
    }

    /// The Held-Karp value of the instance: value(V).
    pub fn total_value(&self) -> Rat {
        let mut v = Rat::zero();
        for ls in self.laminar.sets() {
            v += &ls.y;
        }
        rint(2) * v
    }

    /// lb(v) = 2 y_v.
    pub fn lb(&self, v: usize) -> Rat {
        rint(2) * self.laminar.y_vertex(v)
    }

    pub fn lb_set(&self, u: &VSet) -> Rat {
        let mut t = Rat::zero();
        for v in u.iter() {
            t += self.lb(v);
        }
        t
    }

    /// lb of everything the subtour does not visit.
    pub fn lb_bar(&self, b: &Subtour) -> Rat {
        let visited = b.vertices(&self.g);
        self.lb_set(&visited.complement())
    }

    pub fn is_singleton(&self) -> bool {
        self.laminar.sets().iter().all(|s| s.vset.len() == 1)
    }

    pub fn s_in(&self, s: &VSet) -> VSet {
        self.g.s_in(s)
    }

    pub fn s_out(&self, s: &VSet) -> VSet {
        self.g.s_out(s)
    }

    pub fn x_delta_plus(&self, s: &VSet) -> Rat {
        let mut t = Rat::zero();
        for e in self.g.edges() {
            if s.contains(e.tail) && !s.contains(e.head) {
                t += &self.x[e.id];
            }
        }
        t
    }

    pub fn x_delta_minus(&self, s: &VSet) -> Rat {
        let mut t = Rat::zero();
        for e in self.g.edges() {
            if !s.contains(e.tail) && s.contains(e.head) {
                t += &self.x[e.id];
            }
        }
        t
    }

    /// Checks every instance invariant exactly, returning the list of
    /// violations (empty = ok). Feasibility of x for LP(G,0) is verified by
    /// cut enumeration for n <= 12 and by min-cut separation otherwise.
    pub fn verify_report(&self) -> Vec<String> {
        let mut report = Vec::new();
        let g = &self.g;
        let n = g.n();
        for (e, xe) in self.x.iter().enumerate() {
            if xe <= &Rat::zero() {
                report.push(format!("edge {e} has nonpositive x"));
            }
        }
        // Circulation.
        for v in 0..n {
            let vs = VSet::from_iter(n, [v]);
            if self.x_delta_plus(&vs) != self.x_delta_minus(&vs) {
                report.push(format!("x not balanced at vertex {v}"));
            }
        }
        if !g.is_strongly_connected() {
            report.push("support not strongly connected".into());
        }
        // Subtour elimination.
        let one = rint(1);
        if n <= 12 {
            for mask in 1u64..(1 << n) - 1 {
                let s = VSet::from_iter(n, (0..n).filter(|&i| mask >> i & 1 == 1));
                if self.x_delta_plus(&s) < one {
                    report.push(format!("cut {s:?} below 1"));
                }
            }
        } else {
            for t in 1..n {
                for (s, tt) in [(0usize, t), (t, 0usize)] {
                    let (value, cut) = min_st_cut(g, &self.x, s, tt);
                    if value < one {
                        report.push(format!("separated cut {cut:?} below 1"));
                    }
                }
            }
        }
        // Laminar sets proper and tight.
        for ls in self.laminar.sets() {
            if ls.vset.is_empty() || ls.vset.len() >= n {
                report.push(format!(
                    "laminar set {:?} not a proper nonempty subset",
                    ls.vset
                ));
                continue;
            }
            if self.x_delta_plus(&ls.vset) != one || self.x_delta_minus(&ls.vset) != one {
                report.push(format!("tightness violated on {:?}", ls.vset));
            }
        }
        report
    }

    /// Error-on-first-violation wrapper around `verify_report`.
    pub fn verify(&self) -> Result<()> {
        let report = self.verify_report();
        if report.is_empty() {
            Ok(())
        } else {
            Err(AtspError::Assertion {
                stage: "instance.verify".into(),
                detail: report.join("; "),
                dump: Some(self.to_json()),
            })
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("serialize instance")
    }

    pub fn from_json(s: &str) -> Result<Instance> {
        let file: InstanceFile = serde_json::from_str(s).map_err(|e| AtspError::Parse {
            line: 0,
            msg: format!("instance json: {e}"),
        })?;
        file.into_instance()
    }
}

fn induced_weights(g: &Digraph, laminar: &LaminarForest) -> Vec<Rat> {
    let mut w = vec![Rat::zero(); g.m()];
    for ls in laminar.sets() {
        for e in g.edges() {
            if ls.vset.contains(e.tail) != ls.vset.contains(e.head) {
                w[e.id] += &ls.y;
            }
        }
    }
    w
}

/// Builds the laminarly-weighted instance from an optimal primal/dual pair:
/// keep the support of x, reduce weights by the potentials alpha, carry the
/// laminar dual as (L, y).
pub fn build_instance(
    g: &Digraph,
    w: &[Rat],
    hk: &HeldKarpSolution,
    dual: &DualSolution,
) -> Result<Instance> {
    let n = g.n();
    let mut support = Digraph::new(n);
    let mut x = Vec::new();
    let mut old_to_new = vec![None; g.m()];
    for e in g.edges() {
        if hk.x[e.id] > Rat::zero() {
            let id = support.add_edge(e.tail, e.head, Some(e.id));
            old_to_new[e.id] = Some(id);
            x.push(hk.x[e.id].clone());
        }
    }
    let laminar = LaminarForest::new(dual.family.clone())?;
    let inst = Instance::new(support, laminar, x)?;
    // The reduced weight w'(u,v) = w(u,v) - alpha_u + alpha_v must equal the
    // induced weight on every kept edge (complementary slackness).
    for e in inst.g.edges() {
        let orig = e.preimage.expect("support edge has preimage");
        let wprime = &w[orig] - &dual.alpha[g.edge(orig).tail] + &dual.alpha[g.edge(orig).head];
        if *inst.weight(e.id) != wprime {
            return Err(AtspError::InconsistentDual(format!(
                "edge {orig}: induced weight {} vs reduced weight {}",
                rat_to_string(inst.weight(e.id)),
                rat_to_string(&wprime)
            )));
        }
    }
    // value(I) equals the Held-Karp optimum.
    if inst.total_value() != hk.value {
        return Err(AtspError::InconsistentDual(format!(
            "instance value {} differs from Held-Karp value {}",
            rat_to_string(&inst.total_value()),
            rat_to_string(&hk.value)
        )));
    }
    Ok(inst)
}

// ---------------------------------------------------------------------------
// JSON interchange format: rationals as "p/q" strings, never floats.

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    edges: Vec<EdgeFile>,
    laminar: Vec<SetFile>,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    tail: usize,
    head: usize,
    x: String,
}

#[derive(Serialize, Deserialize)]
struct SetFile {
    vertices: Vec<usize>,
    y: String,
}

impl From<&Instance> for InstanceFile {
    fn from(i: &Instance) -> Self {
        InstanceFile {
            n: i.n(),
            edges: i
                .g
                .edges()
                .iter()
                .map(|e| EdgeFile {
                    tail: e.tail,
                    head: e.head,
                    x: rat_to_string(&i.x[e.id]),
                })
                .collect(),
            laminar: i
                .laminar
                .sets()
                .iter()
                .map(|s| SetFile {
                    vertices: s.vset.to_vec(),
                    y: rat_to_string(&s.y),
                })
                .collect(),
        }
    }
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance> {
        let mut g = Digraph::new(self.n);
        let mut x = Vec::new();
        for e in &self.edges {
            g.add_edge(e.tail, e.head, None);
            x.push(rat_from_string(&e.x)?);
        }
        let mut family = Vec::new();
        for s in &self.laminar {
            if let Some(&v) = s.vertices.iter().find(|&&v| v >= self.n) {
                return Err(AtspError::Parse {
                    line: 0,
                    msg: format!("laminar set vertex {v} out of range"),
                });
            }
            family.push((
                VSet::from_iter(self.n, s.vertices.iter().copied()),
                rat_from_string(&s.y)?,
            ));
        }
        Instance::new(g, LaminarForest::new(family)?, x)
    }
}
