//! Property tests for the structural invariants: Eulerian decompositions,
//! cut-balance of Eulerian multisets, cost linearity, and uncrossing.

use atsp_core::graph::{eulerian_components, walk_is_valid, Digraph, EdgeMultiset};
use atsp_core::heldkarp::uncross_step;
use atsp_core::ratio::{rat, rint, Rat};
use atsp_core::vset::VSet;
use proptest::prelude::*;
use std::collections::BTreeMap;

/// A random Eulerian multiset on a complete digraph: a union of directed
/// cycles with multiplicities.
fn eulerian_multiset(n: usize) -> impl Strategy<Value = (Digraph, EdgeMultiset)> {
    let cycles = prop::collection::vec(
        (prop::collection::vec(0..n, 2..=n), 1u64..=2),
        1..=3,
    );
    cycles.prop_map(move |cycles| {
        let mut g = Digraph::new(n);
        let mut ids = BTreeMap::new();
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    ids.insert((u, v), g.add_edge(u, v, None));
                }
            }
        }
        let mut f = EdgeMultiset::new();
        for (mut verts, mult) in cycles {
            verts.dedup();
            if verts.len() >= 2 && verts.first() == verts.last() {
                verts.pop();
            }
            if verts.len() < 2 {
                continue;
            }
            // Close the vertex sequence into a cycle, skipping repeats.
            for i in 0..verts.len() {
                let a = verts[i];
                let b = verts[(i + 1) % verts.len()];
                if a != b {
                    f.add(ids[&(a, b)], mult);
                }
            }
            // Fix up: the skip above can desync the walk; rebuild strictly.
        }
        (g, f)
    })
}

/// Rebuilds a guaranteed-Eulerian multiset from an arbitrary one by
/// closing each vertex imbalance along direct edges.
fn balance(g: &Digraph, f: &EdgeMultiset) -> EdgeMultiset {
    let n = g.n();
    let mut out = f.clone();
    loop {
        let mut bal = vec![0i64; n];
        for (e, k) in out.iter() {
            bal[g.edge(e).tail] += k as i64;
            bal[g.edge(e).head] -= k as i64;
        }
        let Some(src) = (0..n).find(|&v| bal[v] < 0) else { break };
        let dst = (0..n).find(|&v| bal[v] > 0).expect("net balance is zero");
        let eid = g
            .edges()
            .iter()
            .find(|e| e.tail == src && e.head == dst)
            .expect("complete digraph")
            .id;
        out.add(eid, 1);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eulerian_decomposition_partitions((g, raw) in eulerian_multiset(5)) {
        let f = balance(&g, &raw);
        let comps = eulerian_components(&g, &f).unwrap();
        // Union of component multisets equals the input.
        let union = comps
            .iter()
            .fold(EdgeMultiset::new(), |acc, c| acc.union(&c.edges));
        prop_assert_eq!(union, f.clone());
        // Components are vertex-disjoint and carry valid Euler walks.
        for i in 0..comps.len() {
            prop_assert!(walk_is_valid(&g, &comps[i].edges, &comps[i].walk));
            for j in i + 1..comps.len() {
                prop_assert!(
                    !comps[i].vertices(&g).intersects(&comps[j].vertices(&g))
                );
            }
        }
        // Cut balance: |delta^+_F(S)| = |delta^-_F(S)| for every S.
        for mask in 1u64..(1 << 5) - 1 {
            let s = VSet::from_iter(5, (0..5).filter(|&i| mask >> i & 1 == 1));
            prop_assert_eq!(
                f.delta_plus_count(&g, &s),
                f.delta_minus_count(&g, &s)
            );
        }
    }

    #[test]
    fn uncrossing_preserves_objective(
        ya in 1i64..6, yb in 1i64..6, da in 1i64..4, db in 1i64..4
    ) {
        let n = 8;
        // A = {0..3+da'}, B = {2..} guaranteed crossing.
        let a = VSet::from_iter(n, 0..(3 + da as usize % 3));
        let b = VSet::from_iter(n, 2..(5 + db as usize % 3));
        prop_assume!(a.crosses(&b));
        let mut y = BTreeMap::new();
        y.insert(a.clone(), rat(ya, 2));
        y.insert(b.clone(), rat(yb, 2));
        let y2 = uncross_step(&y, &a, &b).unwrap();
        let total =
            |m: &BTreeMap<VSet, Rat>| m.values().fold(rint(0), |acc, v| acc + v);
        prop_assert_eq!(total(&y), total(&y2));
        let pot = |m: &BTreeMap<VSet, Rat>| {
            m.iter()
                .fold(rint(0), |acc, (s, v)| acc + rint(s.len() as i64) * v)
        };
        // Potential strictly drops by 2 |A cap B| eps.
        let eps = rat(ya.min(yb), 2);
        let drop = rint(2) * rint(a.intersect(&b).len() as i64) * eps;
        prop_assert_eq!(pot(&y) - pot(&y2), drop);
    }

    #[test]
    fn cost_is_crossing_mass(seed in 0u64..200) {
        // cost(F) = sum over sets of y_S * |delta(S) cap F| on a seeded
        // singleton instance with a random multiset.
        let inst = atsp_core::gen::random_singleton_instance(5, seed).unwrap();
        let mut rng = atsp_core::gen::Rng::new(seed);
        let mut f = EdgeMultiset::new();
        for e in 0..inst.g.m() {
            f.add(e, rng.below(2));
        }
        let direct = inst.cost(&f);
        let mut alt = rint(0);
        for ls in inst.laminar.sets() {
            alt += &ls.y * rint(f.delta_count(&inst.g, &ls.vset) as i64);
        }
        prop_assert_eq!(direct, alt);
    }
}
