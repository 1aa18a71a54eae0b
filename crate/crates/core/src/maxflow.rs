//! Exact rational max-flow / min-cut, used as the separation oracle for
//! subtour elimination constraints.

use crate::graph::Digraph;
use crate::ratio::Rat;
use crate::vset::VSet;
use num_traits::Zero;
use std::collections::VecDeque;

struct Arc {
    to: usize,
    cap: Rat,
    rev: usize,
}

struct FlowNet {
    adj: Vec<Vec<Arc>>,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        FlowNet {
            adj: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add(&mut self, u: usize, v: usize, cap: Rat) {
        let ru = self.adj[u].len();
        let rv = self.adj[v].len();
        self.adj[u].push(Arc {
            to: v,
            cap,
            rev: rv,
        });
        self.adj[v].push(Arc {
            to: u,
            cap: Rat::zero(),
            rev: ru,
        });
    }
}

/// Maximum s-t flow with exact rational capacities; returns the flow value
/// and the source side of a minimum cut. Edmonds-Karp, so the number of
/// augmentations is bounded independently of capacity values.
pub fn min_st_cut(
    g: &Digraph,
    cap: &[Rat],
    s: usize,
    t: usize,
) -> (Rat, VSet) {
    assert_ne!(s, t);
    let n = g.n();
    let mut net = FlowNet::new(n);
    for e in g.edges() {
        if cap[e.id] > Rat::zero() && e.tail != e.head {
            net.add(e.tail, e.head, cap[e.id].clone());
        }
    }
    let mut value = Rat::zero();
    loop {
        // BFS for a shortest augmenting path.
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for (i, a) in net.adj[u].iter().enumerate() {
                if !seen[a.to] && a.cap > Rat::zero() {
                    seen[a.to] = true;
                    prev[a.to] = Some((u, i));
                    q.push_back(a.to);
                }
            }
        }
        if !seen[t] {
            break;
        }
        // Bottleneck.
        let mut bottleneck: Option<Rat> = None;
        let mut v = t;
        while v != s {
            let (u, i) = prev[v].unwrap();
            let c = net.adj[u][i].cap.clone();
            bottleneck = Some(match bottleneck {
                None => c,
                Some(b) => {
                    if c < b {
                        c
                    } else {
                        b
                    }
                }
            });
            v = u;
        }
        let aug = bottleneck.unwrap();
        let mut v = t;
        while v != s {
            let (u, i) = prev[v].unwrap();
            let rev = net.adj[u][i].rev;
            net.adj[u][i].cap -= &aug;
            net.adj[v][rev].cap += &aug;
            v = u;
        }
        value += aug;
    }
    // Source side of the min cut = residual-reachable set.
    let mut cut = VSet::empty(n);
    let mut seen = vec![false; n];
    seen[s] = true;
    cut.insert(s);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for a in &net.adj[u] {
            if !seen[a.to] && a.cap > Rat::zero() {
                seen[a.to] = true;
                cut.insert(a.to);
                q.push_back(a.to);
            }
        }
    }
    (value, cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{rat, rint};

    #[test]
    fn unit_cycle() {
        let mut g = Digraph::new(3);
        g.add_edge(0, 1, None);
        g.add_edge(1, 2, None);
        g.add_edge(2, 0, None);
        let cap = vec![rint(1), rint(1), rint(1)];
        let (v, cut) = min_st_cut(&g, &cap, 0, 1);
        assert_eq!(v, rint(1));
        assert!(cut.contains(0) && !cut.contains(1));
        // Oracle: enumerate all cuts separating 0 from 1 and check value.
        let mut best: Option<Rat> = None;
        for mask in 0u32..8 {
            if mask & 1 == 0 || mask & 2 != 0 {
                continue;
            }
            let s = VSet::from_iter(3, (0..3).filter(|&i| mask >> i & 1 == 1));
            let mut capsum = rint(0);
            for e in g.edges() {
                if s.contains(e.tail) && !s.contains(e.head) {
                    capsum += &cap[e.id];
                }
            }
            best = Some(match best {
                None => capsum,
                Some(b) if capsum < b => capsum,
                Some(b) => b,
            });
        }
        assert_eq!(best.unwrap(), v);
    }

    #[test]
    fn parallel_edges_add() {
        let mut g = Digraph::new(2);
        g.add_edge(0, 1, None);
        g.add_edge(0, 1, None);
        let (v, _) = min_st_cut(&g, &[rint(1), rint(1)], 0, 1);
        assert_eq!(v, rint(2));
    }

    #[test]
    fn unreachable_sink() {
        let g = Digraph::new(2);
        let (v, cut) = min_st_cut(&g, &[], 0, 1);
        assert_eq!(v, rint(0));
        assert_eq!(cut.to_vec(), vec![0]);
    }

    #[test]
    fn fractional_capacities_exact() {
        let mut g = Digraph::new(4);
        g.add_edge(0, 1, None);
        g.add_edge(0, 2, None);
        g.add_edge(1, 3, None);
        g.add_edge(2, 3, None);
        let cap = vec![rat(1, 3), rat(1, 7), rat(1, 2), rat(1, 7)];
        let (v, cut) = min_st_cut(&g, &cap, 0, 3);
        // min(1/3,1/2) + min(1/7,1/7) = 1/3 + 1/7 = 10/21.
        assert_eq!(v, rat(10, 21));
        let mut capsum = rint(0);
        for e in g.edges() {
            if cut.contains(e.tail) && !cut.contains(e.head) {
                capsum += &cap[e.id];
            }
        }
        assert_eq!(capsum, v, "strong duality: cut capacity equals flow");
    }
}
