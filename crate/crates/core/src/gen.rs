//! Seeded instance generators and the named test gadgets.

use crate::error::{AtspError, Result};
use crate::graph::{Digraph, EdgeMultiset, Subtour};
use crate::instance::{Instance, LaminarForest};
use crate::ratio::{rat, rint, Rat};
use crate::vset::VSet;

/// SplitMix64: tiny deterministic PRNG; identical output on every platform.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish integer in 0..=max (bias is irrelevant for test data).
    pub fn below(&mut self, max: u64) -> u64 {
        self.next_u64() % (max + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenKind {
    Random,
    NodeWeighted,
    TwoWeight,
    Gadget(GadgetId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GadgetId {
    Fig2Contraction,
    SeriesScc,
    SingleSetVertebrate,
}

impl GenKind {
    pub fn parse(s: &str) -> Result<GenKind> {
        Ok(match s {
            "random" => GenKind::Random,
            "node-weighted" => GenKind::NodeWeighted,
            "two-weight" => GenKind::TwoWeight,
            "fig2-contraction" => GenKind::Gadget(GadgetId::Fig2Contraction),
            "series-scc" => GenKind::Gadget(GadgetId::SeriesScc),
            "single-set-vertebrate" => GenKind::Gadget(GadgetId::SingleSetVertebrate),
            other => {
                return Err(AtspError::Unsupported(format!(
                    "unknown generator kind `{other}`"
                )))
            }
        })
    }
}

fn complete_digraph(n: usize) -> Digraph {
    let mut g = Digraph::new(n);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                g.add_edge(u, v, None);
            }
        }
    }
    g
}

/// Complete digraph with uniform integer weights in [0, 20].
pub fn random_instance(n: usize, seed: u64) -> (Digraph, Vec<Rat>) {
    let mut rng = Rng::new(seed);
    let g = complete_digraph(n);
    let w = (0..g.m()).map(|_| rint(rng.below(20) as i64)).collect();
    (g, w)
}

/// Node-weighted: w(u,v) = f(u) + f(v) with integer f in [0, 10].
pub fn node_weighted_instance(n: usize, seed: u64) -> (Digraph, Vec<Rat>) {
    let mut rng = Rng::new(seed);
    let f: Vec<i64> = (0..n).map(|_| rng.below(10) as i64).collect();
    let g = complete_digraph(n);
    let w = g
        .edges()
        .iter()
        .map(|e| rint(f[e.tail] + f[e.head]))
        .collect();
    (g, w)
}

/// Weights drawn from {1, 10}.
pub fn two_weight_instance(n: usize, seed: u64) -> (Digraph, Vec<Rat>) {
    let mut rng = Rng::new(seed);
    let g = complete_digraph(n);
    let w = (0..g.m())
        .map(|_| if rng.below(1) == 0 { rint(1) } else { rint(10) })
        .collect();
    (g, w)
}

pub fn generate(kind: GenKind, n: usize, seed: u64) -> Result<(Digraph, Vec<Rat>)> {
    if n < 2 && !matches!(kind, GenKind::Gadget(_)) {
        return Err(AtspError::EmptyInput("generator needs n >= 2".into()));
    }
    Ok(match kind {
        GenKind::Random => random_instance(n, seed),
        GenKind::NodeWeighted => node_weighted_instance(n, seed),
        GenKind::TwoWeight => two_weight_instance(n, seed),
        GenKind::Gadget(id) => {
            let inst = gadget_instance(id)?;
            let w = inst.weights().to_vec();
            (inst.g, w)
        }
    })
}

/// Hand-built laminarly-weighted instances used throughout the test suites.
pub fn gadget_instance(id: GadgetId) -> Result<Instance> {
    match id {
        GadgetId::Fig2Contraction => fig2_contraction(),
        GadgetId::SeriesScc => series_scc(),
        GadgetId::SingleSetVertebrate => Ok(single_set_vertebrate()?.0),
    }
}

/// Contraction gadget: a 6-vertex directed cycle with the tight set
/// S = {0,1,2,3} and nested interior sets chosen so that
/// D_S(0,3) = 2 + (2 + 2*2 + 4 + 3) + (3 + 4) = 22 = value(S).
pub fn fig2_contraction() -> Result<Instance> {
    let n = 6;
    let mut g = Digraph::new(n);
    for v in 0..n {
        g.add_edge(v, (v + 1) % n, None);
    }
    let x = vec![rint(1); n];
    let family = vec![
        (VSet::from_iter(n, [0, 1, 2, 3]), rint(1)),
        (VSet::from_iter(n, [0]), rint(2)),
        (VSet::from_iter(n, [1]), rint(2)),
        (VSet::from_iter(n, [2, 3]), rint(3)),
        (VSet::from_iter(n, [3]), rint(4)),
    ];
    Instance::new(g, LaminarForest::new(family)?, x)
}

/// Tight set with two strongly connected components in series, traversed by
/// two parallel half-integral routes. S = {0,1,2,3} splits into SCCs {0,1}
/// and {2,3}; the outside is the 2-cycle on {4,5}.
pub fn series_scc() -> Result<Instance> {
    let n = 6;
    let mut g = Digraph::new(n);
    let edges = [
        (4, 0),
        (5, 1),
        (0, 1),
        (1, 0),
        (0, 2),
        (1, 3),
        (2, 3),
        (3, 2),
        (2, 4),
        (3, 5),
        (4, 5),
        (5, 4),
    ];
    for (t, h) in edges {
        g.add_edge(t, h, None);
    }
    let x = vec![rat(1, 2); g.m()];
    let mut family = vec![(VSet::from_iter(n, [0, 1, 2, 3]), rint(1))];
    for v in 0..n {
        family.push((VSet::from_iter(n, [v]), rat(1, 2)));
    }
    Instance::new(g, LaminarForest::new(family)?, x)
}

/// Vertebrate-pair gadget: one non-singleton set S = {1,2,3} on a
/// 6-vertex cycle, with an internal 2-cycle on {2,3} serving as the
/// backbone.
pub fn single_set_vertebrate() -> Result<(Instance, Subtour)> {
    let n = 6;
    let mut g = Digraph::new(n);
    let mut x = Vec::new();
    for v in 0..n {
        g.add_edge(v, (v + 1) % n, None);
        x.push(if v == 2 { rat(3, 2) } else { rint(1) });
    }
    let back_edge = g.add_edge(3, 2, None);
    x.push(rat(1, 2));
    let family = vec![
        (VSet::from_iter(n, [1, 2, 3]), rint(1)),
        (VSet::from_iter(n, [0]), rat(1, 2)),
        (VSet::from_iter(n, [1]), rat(1, 2)),
        (VSet::from_iter(n, [4]), rat(1, 2)),
        (VSet::from_iter(n, [5]), rat(1, 2)),
    ];
    let inst = Instance::new(g, LaminarForest::new(family)?, x)?;
    // Backbone: the 2-cycle 2 -> 3 -> 2.
    let mut edges = EdgeMultiset::new();
    edges.add(2, 1); // cycle edge 2->3
    edges.add(back_edge, 1);
    let walk = vec![2, back_edge];
    let b = Subtour { edges, walk };
    Ok((inst, b))
}

/// Seeded singleton instance: x is the half sum of two random
/// Hamiltonian cycles, so every singleton is tight; every vertex carries a
/// positive y.
pub fn random_singleton_instance(n: usize, seed: u64) -> Result<Instance> {
    assert!(n >= 3);
    let mut rng = Rng::new(seed ^ 0xD1CEB00C);
    let perm = |rng: &mut Rng| -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.below(i as u64) as usize;
            p.swap(i, j);
        }
        p
    };
    // Two Hamiltonian cycles; overlapping arcs merge into x = 1 edges.
    let mut arcs: Vec<(usize, usize, Rat)> = Vec::new();
    for _ in 0..2 {
        let p = perm(&mut rng);
        for i in 0..n {
            let (t, h) = (p[i], p[(i + 1) % n]);
            match arcs.iter_mut().find(|(a, b, _)| *a == t && *b == h) {
                Some((_, _, x)) => *x = &*x + rat(1, 2),
                None => arcs.push((t, h, rat(1, 2))),
            }
        }
    }
    let mut g = Digraph::new(n);
    let mut x = Vec::new();
    for (t, h, xv) in arcs {
        g.add_edge(t, h, None);
        x.push(xv);
    }
    let mut family = Vec::new();
    for v in 0..n {
        let y = rat(1 + rng.below(6) as i64, 2);
        family.push((VSet::from_iter(n, [v]), y));
    }
    let inst = Instance::new(g, LaminarForest::new(family)?, x)?;
    inst.verify()?;
    Ok(inst)
}

/// Seeded vertebrate gadget: a Hamiltonian cycle with a contiguous tight
/// arc S, a 2-cycle backbone inside S, optionally a nested arc through the
/// backbone, and random singleton weights on the tight vertices.
pub fn random_vertebrate_gadget(seed: u64) -> Result<(Instance, Subtour)> {
    let mut rng = Rng::new(seed ^ 0xBACBACBA);
    let n = 6 + rng.below(3) as usize; // 6..=8
    let slen = 3 + rng.below((n - 5) as u64) as usize; // 3..=n-3
    let start = rng.below((n - 1) as u64) as usize;
    let s: Vec<usize> = (0..slen).map(|k| (start + k) % n).collect();
    // Backbone pair: consecutive cycle vertices inside S.
    let poff = rng.below((slen - 2) as u64) as usize;
    let p = s[poff];
    let p2 = s[poff + 1];

    let eps = rat(1, 2);
    let mut g = Digraph::new(n);
    let mut x = Vec::new();
    let mut cyc_edge = vec![0usize; n];
    for v in 0..n {
        cyc_edge[v] = g.add_edge(v, (v + 1) % n, None);
        x.push(if v == p { rint(1) + &eps } else { rint(1) });
    }
    let back_edge = g.add_edge(p2, p, None);
    x.push(eps.clone());

    let sset = VSet::from_iter(n, s.iter().copied());
    let mut family = vec![(sset.clone(), rat(1 + rng.below(4) as i64, 2))];
    // Optional nested arc through the backbone pair.
    if slen >= 4 && rng.below(1) == 0 {
        let from = if poff + 2 < slen && rng.below(1) == 0 {
            poff
        } else {
            poff.saturating_sub(1)
        };
        let to = (poff + 1).max(from + 1);
        if to - from + 1 < slen {
            let nested: Vec<usize> = (from..=to).map(|k| s[k]).collect();
            if nested.len() >= 2 {
                family.push((
                    VSet::from_iter(n, nested),
                    rat(1 + rng.below(3) as i64, 2),
                ));
            }
        }
    }
    for v in 0..n {
        if v == p || v == p2 {
            continue; // not tight: the 2-cycle raises their degree
        }
        if rng.below(2) > 0 {
            family.push((VSet::from_iter(n, [v]), rat(1 + rng.below(4) as i64, 2)));
        }
    }
    let inst = Instance::new(g, LaminarForest::new(family)?, x)?;
    inst.verify()?;
    let mut edges = EdgeMultiset::new();
    edges.add(cyc_edge[p], 1);
    edges.add(back_edge, 1);
    let b = Subtour {
        edges,
        walk: vec![cyc_edge[p], back_edge],
    };
    // Vertebrate: every non-singleton set holds the backbone pair.
    for ls in inst.laminar.non_singletons() {
        assert!(ls.vset.contains(p) && ls.vset.contains(p2));
    }
    Ok((inst, b))
}

/// Three overlapping Hamiltonian routes at x = 1/3 with the nested tight
/// sets {1,2} and {0,1,2,3,4} on six vertices. Rich enough connectivity
/// that walks can cross {1,2} repeatedly, which exercises the path-repair
/// cases.
pub fn triple_route() -> Result<Instance> {
    let n = 6;
    let routes = [
        vec![0, 1, 2, 3, 4, 5],
        vec![0, 2, 1, 4, 3, 5],
        vec![0, 4, 2, 1, 3, 5],
    ];
    let mut arcs: Vec<(usize, usize, Rat)> = Vec::new();
    for r in &routes {
        for i in 0..n {
            let (t, h) = (r[i], r[(i + 1) % n]);
            match arcs.iter_mut().find(|(a, b, _)| *a == t && *b == h) {
                Some((_, _, x)) => *x = &*x + rat(1, 3),
                None => arcs.push((t, h, rat(1, 3))),
            }
        }
    }
    let mut g = Digraph::new(n);
    let mut x = Vec::new();
    for (t, h, xv) in arcs {
        g.add_edge(t, h, None);
        x.push(xv);
    }
    let mut family = vec![
        (VSet::from_iter(n, [0, 1, 2, 3, 4]), rint(1)),
        (VSet::from_iter(n, [1, 2]), rint(1)),
    ];
    for v in 0..n {
        family.push((VSet::from_iter(n, [v]), rat(1, 2)));
    }
    let inst = Instance::new(g, LaminarForest::new(family)?, x)?;
    inst.verify()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let (g1, w1) = random_instance(6, 42);
        let (g2, w2) = random_instance(6, 42);
        assert_eq!(g1.m(), g2.m());
        assert_eq!(w1, w2);
        let (_, w3) = random_instance(6, 43);
        assert_ne!(w1, w3);
    }

    #[test]
    fn node_weighted_decomposes() {
        let (g, w) = node_weighted_instance(5, 7);
        // w(u,v) = f(u) + f(v) is symmetric by construction.
        for e in g.edges() {
            let back = g
                .edges()
                .iter()
                .find(|r| r.tail == e.head && r.head == e.tail)
                .unwrap();
            assert_eq!(w[e.id], w[back.id]);
        }
    }

    #[test]
    fn gadgets_are_valid_instances() {
        for id in [
            GadgetId::Fig2Contraction,
            GadgetId::SeriesScc,
            GadgetId::SingleSetVertebrate,
        ] {
            let inst = gadget_instance(id).unwrap();
            inst.verify().unwrap();
        }
        let (inst, b) = single_set_vertebrate().unwrap();
        // The backbone visits the only non-singleton set.
        let bv = b.vertices(&inst.g);
        for s in inst.laminar.non_singletons() {
            assert!(s.vset.intersects(&bv));
        }
    }

    #[test]
    fn two_weight_values() {
        let (_, w) = two_weight_instance(5, 3);
        assert!(w.iter().all(|x| *x == rint(1) || *x == rint(10)));
    }
}
