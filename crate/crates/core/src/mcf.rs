//! Minimum-cost integral flow with per-arc integer lower/upper bounds,
//! rational costs, and per-node supplies. Successive shortest augmenting
//! paths on the residual network, followed by negative-cycle canceling so
//! the result is cost-minimal for arbitrary sign patterns.

use crate::error::{AtspError, Result};
use crate::ratio::Rat;
use num_traits::Zero;

#[derive(Clone, Debug)]
pub struct FlowArc {
    pub tail: usize,
    pub head: usize,
    /// Lower bound; may be negative (flow in the reverse direction).
    pub lower: i64,
    /// Upper bound; `None` means unbounded above.
    pub upper: Option<i64>,
    pub cost: Rat,
}

#[derive(Clone, Debug, Default)]
pub struct FlowNetwork {
    pub n: usize,
    pub arcs: Vec<FlowArc>,
    /// Positive = the node must ship this much out; negative = absorb.
    pub supply: Vec<i64>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork {
            n,
            arcs: Vec::new(),
            supply: vec![0; n],
        }
    }

    pub fn add_arc(&mut self, tail: usize, head: usize, lower: i64, upper: Option<i64>, cost: Rat) -> usize {
        assert!(tail < self.n && head < self.n);
        if let Some(u) = upper {
            assert!(lower <= u, "lower bound exceeds upper bound");
        }
        self.arcs.push(FlowArc {
            tail,
            head,
            lower,
            upper,
            cost,
        });
        self.arcs.len() - 1
    }
}

struct Res {
    to: usize,
    cap: i64,
    cost: Rat,
    rev: usize,
    /// Original arc index and direction (+1 forward, -1 backward);
    /// usize::MAX for auxiliary arcs.
    arc: usize,
    dir: i64,
}

struct ResGraph {
    adj: Vec<Vec<Res>>,
}

impl ResGraph {
    fn new(n: usize) -> Self {
        ResGraph {
            adj: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add(&mut self, u: usize, v: usize, cap: i64, cost: Rat, arc: usize, dir: i64) {
        let ru = self.adj[u].len();
        let rv = self.adj[v].len();
        let ncost = -cost.clone();
        self.adj[u].push(Res {
            to: v,
            cap,
            cost,
            rev: rv,
            arc,
            dir,
        });
        self.adj[v].push(Res {
            to: u,
            cap: 0,
            cost: ncost,
            rev: ru,
            arc,
            dir: -dir,
        });
    }
}

/// Solves for an integral, feasible, cost-minimal flow. On infeasibility the
/// error carries the violated-cut certificate (nodes still reachable from
/// the excess side in the residual network).
pub fn min_cost_integral_flow(net: &FlowNetwork) -> Result<Vec<i64>> {
    let n = net.n;
    // Reduce lower bounds to imbalances; arcs then carry 0..(upper-lower).
    let mut balance: Vec<i64> = net.supply.clone();
    let mut excess_total: i64 = 0;
    for a in &net.arcs {
        balance[a.tail] -= a.lower;
        balance[a.head] += a.lower;
    }
    for &b in &balance {
        if b > 0 {
            excess_total += b;
        }
    }
    // Finite stand-in for "unbounded": no augmenting step ever needs more
    // than the total excess plus the circulating mass from lower bounds.
    let mut big: i64 = excess_total + 1;
    for a in &net.arcs {
        big = big.saturating_add(a.lower.abs());
    }
    big = big.saturating_add(1).max(1);

    let s = n;
    let t = n + 1;
    let mut g = ResGraph::new(n + 2);
    for (i, a) in net.arcs.iter().enumerate() {
        let cap = match a.upper {
            Some(u) => u - a.lower,
            None => big,
        };
        g.add(a.tail, a.head, cap, a.cost.clone(), i, 1);
    }
    for v in 0..n {
        if balance[v] > 0 {
            g.add(s, v, balance[v], Rat::zero(), usize::MAX, 0);
        } else if balance[v] < 0 {
            g.add(v, t, -balance[v], Rat::zero(), usize::MAX, 0);
        }
    }

    // Successive shortest augmenting paths (Bellman-Ford distances: residual
    // costs may be negative after canceling or with negative input costs).
    let nn = n + 2;
    let mut shipped: i64 = 0;
    loop {
        let (dist, prev) = bellman_ford(&g, nn, s);
        if dist[t].is_none() {
            break;
        }
        // Bottleneck along the path.
        let mut bottleneck = i64::MAX;
        let mut v = t;
        while v != s {
            let (u, idx) = prev[v].expect("path exists");
            bottleneck = bottleneck.min(g.adj[u][idx].cap);
            v = u;
        }
        let mut v = t;
        while v != s {
            let (u, idx) = prev[v].expect("path exists");
            let rev = g.adj[u][idx].rev;
            g.adj[u][idx].cap -= bottleneck;
            g.adj[v][rev].cap += bottleneck;
            v = u;
        }
        shipped += bottleneck;
    }
    if shipped < excess_total {
        // Certificate: residual-reachable original nodes from the excess side.
        let (dist, _) = bellman_ford(&g, nn, s);
        let cut: Vec<usize> = (0..n).filter(|&v| dist[v].is_some()).collect();
        return Err(AtspError::FlowInfeasible(cut));
    }

    // Cancel negative residual cycles until cost-minimal.
    loop {
        match find_negative_cycle(&g, nn) {
            None => break,
            Some(cycle) => {
                let mut bottleneck = i64::MAX;
                for &(u, idx) in &cycle {
                    bottleneck = bottleneck.min(g.adj[u][idx].cap);
                }
                debug_assert!(bottleneck > 0);
                for &(u, idx) in &cycle {
                    let rev = g.adj[u][idx].rev;
                    let to = g.adj[u][idx].to;
                    g.adj[u][idx].cap -= bottleneck;
                    g.adj[to][rev].cap += bottleneck;
                }
            }
        }
    }

    // Recover per-arc flow: lower + used forward capacity.
    let mut flow: Vec<i64> = net.arcs.iter().map(|a| a.lower).collect();
    for u in 0..nn {
        for r in &g.adj[u] {
            if r.arc != usize::MAX && r.dir == -1 {
                // Reverse residual capacity equals the amount pushed forward.
                flow[r.arc] += r.cap;
            }
        }
    }
    Ok(flow)
}

fn bellman_ford(
    g: &ResGraph,
    nn: usize,
    s: usize,
) -> (Vec<Option<Rat>>, Vec<Option<(usize, usize)>>) {
    let mut dist: Vec<Option<Rat>> = vec![None; nn];
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; nn];
    dist[s] = Some(Rat::zero());
    for _ in 0..nn {
        let mut changed = false;
        for u in 0..nn {
            let Some(du) = dist[u].clone() else { continue };
            for (idx, r) in g.adj[u].iter().enumerate() {
                if r.cap <= 0 {
                    continue;
                }
                let nd = &du + &r.cost;
                let better = match &dist[r.to] {
                    None => true,
                    Some(d) => nd < *d,
                };
                if better {
                    dist[r.to] = Some(nd);
                    prev[r.to] = Some((u, idx));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (dist, prev)
}

/// Finds a negative-cost residual cycle, as a list of (node, adjacency index)
/// hops, or `None`.
fn find_negative_cycle(g: &ResGraph, nn: usize) -> Option<Vec<(usize, usize)>> {
    // Bellman-Ford from a virtual super-source (all distances start 0).
    let mut dist: Vec<Rat> = vec![Rat::zero(); nn];
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; nn];
    let mut last_updated = None;
    for round in 0..nn {
        let mut changed = None;
        for u in 0..nn {
            for (idx, r) in g.adj[u].iter().enumerate() {
                if r.cap <= 0 {
                    continue;
                }
                let nd = &dist[u] + &r.cost;
                if nd < dist[r.to] {
                    dist[r.to] = nd;
                    prev[r.to] = Some((u, idx));
                    changed = Some(r.to);
                }
            }
        }
        last_updated = changed;
        if changed.is_none() {
            return None;
        }
        if round == nn - 1 {
            break;
        }
    }
    // A vertex updated in the nn-th round lies on or leads to a cycle.
    let mut v = last_updated?;
    for _ in 0..nn {
        v = prev[v]?.0;
    }
    let start = v;
    let mut cycle = Vec::new();
    loop {
        let (u, idx) = prev[v]?;
        cycle.push((u, idx));
        v = u;
        if v == start {
            break;
        }
    }
    cycle.reverse();
    Some(cycle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{rat, rint};

    #[test]
    fn forced_single_edge() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, 1, Some(1), rint(5));
        net.supply = vec![-0, 0];
        // Circulation impossible on a single forced edge without the return.
        assert!(min_cost_integral_flow(&net).is_err());
        // With supplies it ships: 0 must send 1 to 1.
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, 1, Some(1), rint(5));
        net.supply = vec![1, -1];
        let f = min_cost_integral_flow(&net).unwrap();
        assert_eq!(f, vec![1]);
    }

    #[test]
    fn cheaper_parallel_edge_wins() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, 0, Some(1), rint(1));
        net.add_arc(0, 1, 0, Some(1), rint(2));
        net.supply = vec![1, -1];
        let f = min_cost_integral_flow(&net).unwrap();
        assert_eq!(f, vec![1, 0]);
    }

    #[test]
    fn forced_cycle_circulation() {
        // 3-cycle with a lower bound of 1 on one edge: the only feasible
        // integral circulation is the unit circulation around the cycle.
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 1, 1, Some(5), rint(1));
        net.add_arc(1, 2, 0, Some(5), rint(1));
        net.add_arc(2, 0, 0, Some(5), rint(1));
        let f = min_cost_integral_flow(&net).unwrap();
        assert_eq!(f, vec![1, 1, 1]);
    }

    #[test]
    fn rational_costs_pick_optimum() {
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 1, 0, Some(2), rat(1, 3));
        net.add_arc(0, 2, 0, Some(2), rat(1, 2));
        net.add_arc(1, 3, 0, Some(1), rint(0));
        net.add_arc(2, 3, 0, Some(2), rint(0));
        net.supply = vec![2, 0, 0, -2];
        let f = min_cost_integral_flow(&net).unwrap();
        assert_eq!(f, vec![1, 1, 1, 1]);
    }

    #[test]
    fn negative_lower_bound_reverses() {
        // An arc forced to carry flow -2 (i.e. 2 units against its direction)
        // must be balanced by the parallel forward arc.
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, -2, Some(-2), rint(0));
        net.add_arc(0, 1, 0, Some(4), rint(1));
        let f = min_cost_integral_flow(&net).unwrap();
        assert_eq!(f, vec![-2, 2]);
    }

    #[test]
    fn infeasible_reports_cut() {
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 1, 0, Some(1), rint(0));
        net.supply = vec![2, -2, 0];
        match min_cost_integral_flow(&net) {
            Err(AtspError::FlowInfeasible(cut)) => assert!(cut.contains(&0)),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_above_arc() {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, 0, None, rint(1));
        net.add_arc(1, 0, 0, None, rint(0));
        net.supply = vec![3, -3];
        let f = min_cost_integral_flow(&net).unwrap();
        assert_eq!(f[0], 3);
    }
}
