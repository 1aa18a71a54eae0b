//! Exact rational linear programming: bounded-variable two-phase primal
//! simplex with a dual-simplex path for incremental row addition (the
//! cutting-plane host). Bland's anti-cycling rule guarantees termination;
//! a Dantzig-style rule is used while pivots make progress.

use crate::error::{AtspError, Result};
use crate::ratio::Rat;
use num_traits::{Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, Rat)>,
    pub sense: RowSense,
    pub rhs: Rat,
}

/// Variable bounds: `None` stands for the corresponding infinity.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rat>,
    pub lower: Vec<Option<Rat>>,
    pub upper: Vec<Option<Rat>>,
    pub rows: Vec<Row>,
}

impl Default for Sense {
    fn default() -> Self {
        Sense::Min
    }
}

impl LinearProgram {
    pub fn minimize(nvars: usize) -> Self {
        LinearProgram {
            sense: Sense::Min,
            objective: vec![Rat::zero(); nvars],
            lower: vec![Some(Rat::zero()); nvars],
            upper: vec![None; nvars],
            rows: Vec::new(),
        }
    }

    pub fn maximize(nvars: usize) -> Self {
        let mut lp = Self::minimize(nvars);
        lp.sense = Sense::Max;
        lp
    }

    pub fn nvars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Value per structural variable (only meaningful when optimal).
    pub primal: Vec<Rat>,
    /// Row multipliers, in the sign convention of the original sense.
    pub dual: Vec<Rat>,
    /// Reduced cost per structural variable.
    pub reduced: Vec<Rat>,
    pub objective: Rat,
    /// Infeasibility certificate: row combination from phase 1.
    pub farkas: Option<Vec<Rat>>,
    pub pivots: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable currently parked at zero.
    FreeZero,
}

const DEGENERATE_SWITCH: u32 = 40;
const MAX_PIVOTS: u64 = 2_000_000;

pub struct LpSolver {
    lp: LinearProgram,
    // Internal minimization costs for structurals (negated for Max).
    cost: Vec<Rat>,
    // Column layout: structurals | slacks | artificials.
    ncols: usize,
    nstruct: usize,
    lower: Vec<Option<Rat>>,
    upper: Vec<Option<Rat>>,
    tab: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    zrow: Vec<Rat>,
    rhs_col: Vec<Rat>,
    pivots: u64,
    solved: bool,
}

impl LpSolver {
    pub fn new(lp: LinearProgram) -> Self {
        let nstruct = lp.nvars();
        let cost = match lp.sense {
            Sense::Min => lp.objective.clone(),
            Sense::Max => lp.objective.iter().map(|c| -c.clone()).collect(),
        };
        LpSolver {
            lp,
            cost,
            ncols: 0,
            nstruct,
            lower: Vec::new(),
            upper: Vec::new(),
            tab: Vec::new(),
            basis: Vec::new(),
            state: Vec::new(),
            zrow: Vec::new(),
            rhs_col: Vec::new(),
            pivots: 0,
            solved: false,
        }
    }

    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    fn m(&self) -> usize {
        self.lp.rows.len()
    }

    fn slack_col(&self, i: usize) -> usize {
        self.nstruct + i
    }

    fn art_col(&self, i: usize) -> usize {
        self.nstruct + self.m() + i
    }

    fn is_fixed(&self, j: usize) -> bool {
        match (&self.lower[j], &self.upper[j]) {
            (Some(l), Some(u)) => l == u,
            _ => false,
        }
    }

    fn nonbasic_value(&self, j: usize) -> Rat {
        match self.state[j] {
            VarState::AtLower => self.lower[j].clone().expect("lower bound"),
            VarState::AtUpper => self.upper[j].clone().expect("upper bound"),
            VarState::FreeZero => Rat::zero(),
            VarState::Basic => unreachable!("basic var has no bound value"),
        }
    }

    fn value_of(&self, j: usize, beta: &[Rat]) -> Rat {
        if self.state[j] == VarState::Basic {
            let r = self.basis.iter().position(|&b| b == j).expect("basic row");
            beta[r].clone()
        } else {
            self.nonbasic_value(j)
        }
    }

    /// Current basic values: rhs_col minus contributions of nonbasic
    /// variables sitting at nonzero bounds.
    fn compute_beta(&self) -> Vec<Rat> {
        let m = self.m();
        let mut beta = self.rhs_col.clone();
        for j in 0..self.ncols {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v.is_zero() {
                continue;
            }
            for i in 0..m {
                if !self.tab[i][j].is_zero() {
                    let delta = &self.tab[i][j] * &v;
                    beta[i] -= delta;
                }
            }
        }
        beta
    }

    /// Builds the tableau from scratch and runs both phases.
    pub fn solve(&mut self) -> Result<LpOutcome> {
        let m = self.m();
        let nstruct = self.nstruct;
        self.ncols = nstruct + 2 * m;
        self.lower = Vec::with_capacity(self.ncols);
        self.upper = Vec::with_capacity(self.ncols);
        self.lower.extend(self.lp.lower.iter().cloned());
        self.upper.extend(self.lp.upper.iter().cloned());
        for row in &self.lp.rows {
            // Slack: a.x + s = b with s ranged by the row sense.
            match row.sense {
                RowSense::Le => {
                    self.lower.push(Some(Rat::zero()));
                    self.upper.push(None);
                }
                RowSense::Ge => {
                    self.lower.push(None);
                    self.upper.push(Some(Rat::zero()));
                }
                RowSense::Eq => {
                    self.lower.push(Some(Rat::zero()));
                    self.upper.push(Some(Rat::zero()));
                }
            }
        }
        // Artificial bounds are set once the initial residuals are known.
        for _ in 0..m {
            self.lower.push(Some(Rat::zero()));
            self.upper.push(Some(Rat::zero()));
        }

        // Initial nonbasic states.
        self.state = (0..self.ncols)
            .map(|j| match (&self.lower[j], &self.upper[j]) {
                (Some(_), _) => VarState::AtLower,
                (None, Some(_)) => VarState::AtUpper,
                (None, None) => VarState::FreeZero,
            })
            .collect();

        // Tableau rows: structural coefficients, slack identity, artificial
        // identity. Initial basis = artificials, so B = I.
        self.tab = vec![vec![Rat::zero(); self.ncols]; m];
        self.rhs_col = Vec::with_capacity(m);
        for (i, row) in self.lp.rows.iter().enumerate() {
            for (j, c) in &row.coeffs {
                self.tab[i][*j] += c.clone();
            }
            let sc = self.slack_col(i);
            self.tab[i][sc] = Rat::from(num_bigint::BigInt::from(1));
            let ac = self.art_col(i);
            self.tab[i][ac] = Rat::from(num_bigint::BigInt::from(1));
            self.rhs_col.push(row.rhs.clone());
        }
        self.basis = (0..m).map(|i| self.art_col(i)).collect();

        // Residuals determine the artificial signs.
        let mut resid = self.rhs_col.clone();
        for j in 0..self.ncols {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = match self.state[j] {
                VarState::AtLower => self.lower[j].clone().unwrap(),
                VarState::AtUpper => self.upper[j].clone().unwrap(),
                _ => Rat::zero(),
            };
            if v.is_zero() {
                continue;
            }
            for i in 0..m {
                if !self.tab[i][j].is_zero() {
                    let delta = &self.tab[i][j] * &v;
                    resid[i] -= delta;
                }
            }
        }
        let mut phase1_cost = vec![Rat::zero(); self.ncols];
        for i in 0..m {
            let ac = self.art_col(i);
            self.state[ac] = VarState::Basic;
            if resid[i] >= Rat::zero() {
                self.lower[ac] = Some(Rat::zero());
                self.upper[ac] = None;
                phase1_cost[ac] = Rat::from(num_bigint::BigInt::from(1));
            } else {
                self.lower[ac] = None;
                self.upper[ac] = Some(Rat::zero());
                phase1_cost[ac] = Rat::from(num_bigint::BigInt::from(-1));
            }
        }

        // Phase 1.
        self.zrow = self.fresh_zrow(&phase1_cost);
        self.primal_loop(true)?;
        let beta = self.compute_beta();
        let mut phase1_obj = Rat::zero();
        for i in 0..m {
            let ac = self.art_col(i);
            phase1_obj += &phase1_cost[ac] * &self.value_of(ac, &beta);
        }
        if phase1_obj > Rat::zero() {
            let farkas: Vec<Rat> = (0..m)
                .map(|i| {
                    let ac = self.art_col(i);
                    &phase1_cost[ac] - &self.zrow[ac]
                })
                .collect();
            self.solved = false;
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                primal: vec![Rat::zero(); nstruct],
                dual: vec![Rat::zero(); m],
                reduced: vec![Rat::zero(); nstruct],
                objective: Rat::zero(),
                farkas: Some(farkas),
                pivots: self.pivots,
            });
        }
        // Pin all artificials at zero for phase 2.
        for i in 0..m {
            let ac = self.art_col(i);
            self.lower[ac] = Some(Rat::zero());
            self.upper[ac] = Some(Rat::zero());
            if self.state[ac] != VarState::Basic {
                self.state[ac] = VarState::AtLower;
            }
        }

        // Phase 2.
        let phase2_cost = self.full_cost();
        self.zrow = self.fresh_zrow(&phase2_cost);
        let unbounded = !self.primal_loop(false)?;
        if unbounded {
            self.solved = false;
            return Ok(LpOutcome {
                status: LpStatus::Unbounded,
                primal: vec![Rat::zero(); nstruct],
                dual: vec![Rat::zero(); m],
                reduced: vec![Rat::zero(); nstruct],
                objective: Rat::zero(),
                farkas: None,
                pivots: self.pivots,
            });
        }
        self.solved = true;
        Ok(self.extract_outcome())
    }

    fn full_cost(&self) -> Vec<Rat> {
        let mut c = vec![Rat::zero(); self.ncols];
        c[..self.nstruct].clone_from_slice(&self.cost);
        c
    }

    fn fresh_zrow(&self, cost: &[Rat]) -> Vec<Rat> {
        let mut z = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            let f = cost[b].clone();
            for j in 0..self.ncols {
                if !self.tab[i][j].is_zero() {
                    let delta = &f * &self.tab[i][j];
                    z[j] -= delta;
                }
            }
        }
        z
    }

    /// Runs primal simplex to optimality. Returns Ok(false) on unbounded
    /// (only possible in phase 2).
    fn primal_loop(&mut self, phase1: bool) -> Result<bool> {
        let m = self.m();
        let mut bland = false;
        let mut degen: u32 = 0;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(AtspError::Assertion {
                    stage: "lp.primal".into(),
                    detail: "pivot limit exceeded".into(),
                    dump: None,
                });
            }
            // Pricing.
            let mut entering: Option<(usize, Rat)> = None;
            for j in 0..self.ncols {
                if self.state[j] == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let rc = &self.zrow[j];
                let eligible = match self.state[j] {
                    VarState::AtLower => rc < &Rat::zero(),
                    VarState::AtUpper => rc > &Rat::zero(),
                    VarState::FreeZero => !rc.is_zero(),
                    VarState::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, rc.clone()));
                    break;
                }
                let score = rc.abs();
                match &entering {
                    None => entering = Some((j, score)),
                    Some((_, best)) if score > *best => entering = Some((j, score)),
                    _ => {}
                }
            }
            let Some((j, _)) = entering else {
                return Ok(true);
            };
            let dir: i32 = match self.state[j] {
                VarState::AtLower => 1,
                VarState::AtUpper => -1,
                VarState::FreeZero => {
                    if self.zrow[j] < Rat::zero() {
                        1
                    } else {
                        -1
                    }
                }
                VarState::Basic => unreachable!(),
            };

            // Ratio test.
            let beta = self.compute_beta();
            // Own-bound flip distance.
            let mut best_t: Option<Rat> = match (&self.lower[j], &self.upper[j]) {
                (Some(l), Some(u)) => Some(u - l),
                _ => None,
            };
            let mut leaving: Option<(usize, bool)> = None; // (row, hits_upper)
            for i in 0..m {
                if self.tab[i][j].is_zero() {
                    continue;
                }
                // x_B(i) moves at rate -dir * tab[i][j] per unit step.
                let rate = if dir == 1 {
                    -self.tab[i][j].clone()
                } else {
                    self.tab[i][j].clone()
                };
                let b = self.basis[i];
                let (limit, hits_upper) = if rate < Rat::zero() {
                    match &self.lower[b] {
                        Some(l) => ((&beta[i] - l) / -rate.clone(), false),
                        None => continue,
                    }
                } else {
                    match &self.upper[b] {
                        Some(u) => ((u - &beta[i]) / rate.clone(), true),
                        None => continue,
                    }
                };
                debug_assert!(limit >= Rat::zero(), "negative ratio implies infeasible basis");
                let replace = match &best_t {
                    None => true,
                    Some(t) => {
                        limit < *t
                            || (limit == *t
                                && match leaving {
                                    None => false,
                                    Some((r, _)) => self.basis[i] < self.basis[r],
                                })
                    }
                };
                if replace {
                    best_t = Some(limit);
                    leaving = Some((i, hits_upper));
                }
            }
            let Some(t) = best_t else {
                if phase1 {
                    return Err(AtspError::Assertion {
                        stage: "lp.phase1".into(),
                        detail: "phase-1 objective unbounded".into(),
                        dump: None,
                    });
                }
                return Ok(false);
            };

            if t.is_zero() {
                degen += 1;
                if degen > DEGENERATE_SWITCH {
                    bland = true;
                }
            } else {
                degen = 0;
                bland = false;
            }

            match leaving {
                None => {
                    // Bound flip.
                    self.state[j] = match self.state[j] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        s => s,
                    };
                    self.pivots += 1;
                }
                Some((r, hits_upper)) => {
                    self.do_pivot(r, j, hits_upper);
                }
            }
        }
    }

    /// Row operations for entering column `j` at row `r`; the leaving
    /// variable lands on its lower or upper bound.
    fn do_pivot(&mut self, r: usize, j: usize, leaving_hits_upper: bool) {
        self.pivots += 1;
        let leaving = self.basis[r];
        let piv = self.tab[r][j].clone();
        debug_assert!(!piv.is_zero());
        // Normalize pivot row.
        if !piv.is_zero() {
            let inv = Rat::from(num_bigint::BigInt::from(1)) / piv;
            for v in self.tab[r].iter_mut() {
                if !v.is_zero() {
                    *v *= &inv;
                }
            }
            self.rhs_col[r] *= &inv;
        }
        // Sparse support of the pivot row.
        let support: Vec<usize> = (0..self.ncols)
            .filter(|&k| !self.tab[r][k].is_zero())
            .collect();
        for i in 0..self.m() {
            if i == r || self.tab[i][j].is_zero() {
                continue;
            }
            let f = self.tab[i][j].clone();
            for &k in &support {
                let delta = &f * &self.tab[r][k];
                self.tab[i][k] -= delta;
            }
            let delta = &f * &self.rhs_col[r];
            self.rhs_col[i] -= delta;
        }
        if !self.zrow[j].is_zero() {
            let f = self.zrow[j].clone();
            for &k in &support {
                let delta = &f * &self.tab[r][k];
                self.zrow[k] -= delta;
            }
        }
        self.basis[r] = j;
        self.state[j] = VarState::Basic;
        self.state[leaving] = if leaving_hits_upper {
            VarState::AtUpper
        } else {
            VarState::AtLower
        };
        // A leaving artificial never comes back.
        if leaving >= self.nstruct + self.m() {
            self.lower[leaving] = Some(Rat::zero());
            self.upper[leaving] = Some(Rat::zero());
            self.state[leaving] = VarState::AtLower;
        }
    }

    fn extract_outcome(&self) -> LpOutcome {
        let m = self.m();
        let beta = self.compute_beta();
        let mut primal = Vec::with_capacity(self.nstruct);
        for j in 0..self.nstruct {
            primal.push(self.value_of(j, &beta));
        }
        let mut objective = Rat::zero();
        for j in 0..self.nstruct {
            objective += &self.cost[j] * &primal[j];
        }
        let mut dual: Vec<Rat> = (0..m).map(|i| -self.zrow[self.art_col(i)].clone()).collect();
        let mut reduced: Vec<Rat> = (0..self.nstruct).map(|j| self.zrow[j].clone()).collect();
        let mut obj_out = objective;
        if self.lp.sense == Sense::Max {
            obj_out = -obj_out;
            for d in dual.iter_mut() {
                *d = -d.clone();
            }
            for rc in reduced.iter_mut() {
                *rc = -rc.clone();
            }
        }
        LpOutcome {
            status: LpStatus::Optimal,
            primal,
            dual,
            reduced,
            objective: obj_out,
            farkas: None,
            pivots: self.pivots,
        }
    }

    /// Appends a row and re-optimizes with dual simplex from the previous
    /// basis. Falls back to a fresh solve if the warm start cannot proceed.
    pub fn add_row_and_resolve(&mut self, row: Row) -> Result<LpOutcome> {
        if !self.solved {
            self.lp.rows.push(row);
            return self.solve();
        }
        let beta_before = self.compute_beta();
        let slack_bounds = match row.sense {
            RowSense::Le => (Some(Rat::zero()), None),
            RowSense::Ge => (None, Some(Rat::zero())),
            RowSense::Eq => (Some(Rat::zero()), Some(Rat::zero())),
        };
        // Current structural values, for the new slack's starting value.
        let mut slack_val = row.rhs.clone();
        for (j, c) in &row.coeffs {
            let xv = self.value_of(*j, &beta_before);
            slack_val -= c * &xv;
        }

        let m_old = self.m();
        let old_art_start = self.nstruct + m_old;
        // Insert two new columns: slack at old_art_start (keeping the
        // slack block contiguous) and artificial at the end.
        for r in self.tab.iter_mut() {
            r.insert(old_art_start, Rat::zero());
            r.push(Rat::zero());
        }
        self.zrow.insert(old_art_start, Rat::zero());
        self.zrow.push(Rat::zero());
        self.lower.insert(old_art_start, slack_bounds.0);
        self.upper.insert(old_art_start, slack_bounds.1);
        self.lower.push(Some(Rat::zero()));
        self.upper.push(Some(Rat::zero()));
        self.state.insert(old_art_start, VarState::Basic);
        self.state.push(VarState::AtLower);
        // Shift basis indices past the insertion point.
        for b in self.basis.iter_mut() {
            if *b >= old_art_start {
                *b += 1;
            }
        }
        self.lp.rows.push(row);
        let m = self.m();
        self.ncols = self.nstruct + 2 * m;

        // Build and reduce the appended tableau row.
        let new_slack = self.nstruct + m - 1;
        let new_art = self.ncols - 1;
        let mut trow = vec![Rat::zero(); self.ncols];
        {
            let row = self.lp.rows.last().unwrap();
            for (j, c) in &row.coeffs {
                trow[*j] += c.clone();
            }
        }
        trow[new_slack] = Rat::from(num_bigint::BigInt::from(1));
        trow[new_art] = Rat::from(num_bigint::BigInt::from(1));
        let mut trhs = self.lp.rows.last().unwrap().rhs.clone();
        for i in 0..m_old {
            let b = self.basis[i];
            if trow[b].is_zero() {
                continue;
            }
            let f = trow[b].clone();
            for k in 0..self.ncols {
                if !self.tab[i][k].is_zero() {
                    let delta = &f * &self.tab[i][k];
                    trow[k] -= delta;
                }
            }
            let delta = &f * &self.rhs_col[i];
            trhs -= delta;
        }
        debug_assert!(trow[new_slack] == Rat::from(num_bigint::BigInt::from(1)));
        self.tab.push(trow);
        self.rhs_col.push(trhs);
        self.basis.push(new_slack);
        debug_assert_eq!(self.compute_beta()[m - 1], slack_val);

        // The new slack is basic at slack_val; if that violates its bounds,
        // dual simplex restores primal feasibility.
        match self.dual_simplex_loop() {
            Ok(true) => {
                self.solved = true;
                Ok(self.extract_outcome())
            }
            Ok(false) => {
                self.solved = false;
                // Dual unbounded = primal infeasible; produce a certificate
                // via a fresh solve (also covers pathological warm starts).
                self.solve()
            }
            Err(_) => self.solve(),
        }
    }

    /// Returns Ok(true) when primal feasibility is restored, Ok(false) when
    /// the problem is primal infeasible.
    fn dual_simplex_loop(&mut self) -> Result<bool> {
        let m = self.m();
        let mut rounds: u64 = 0;
        loop {
            rounds += 1;
            if rounds > MAX_PIVOTS {
                return Err(AtspError::Assertion {
                    stage: "lp.dual".into(),
                    detail: "dual simplex iteration limit".into(),
                    dump: None,
                });
            }
            let beta = self.compute_beta();
            // Most violated basic variable leaves.
            let mut leave: Option<(usize, Rat, bool)> = None; // (row, violation, below)
            for i in 0..m {
                let b = self.basis[i];
                if let Some(l) = &self.lower[b] {
                    if &beta[i] < l {
                        let viol = l - &beta[i];
                        if leave.as_ref().map(|(_, v, _)| viol > *v).unwrap_or(true) {
                            leave = Some((i, viol, true));
                        }
                    }
                }
                if let Some(u) = &self.upper[b] {
                    if &beta[i] > u {
                        let viol = &beta[i] - u;
                        if leave.as_ref().map(|(_, v, _)| viol > *v).unwrap_or(true) {
                            leave = Some((i, viol, false));
                        }
                    }
                }
            }
            let Some((r, _, below)) = leave else {
                return Ok(true);
            };
            // Entering: keep dual feasibility; minimize |zrow_j / t_rj|.
            let mut enter: Option<(usize, Rat)> = None;
            for j in 0..self.ncols {
                if self.state[j] == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let t = &self.tab[r][j];
                if t.is_zero() {
                    continue;
                }
                // Moving x_j in its feasible direction d changes the basic
                // by -d * t per unit; we need the right sign.
                let ok = match self.state[j] {
                    VarState::AtLower => {
                        if below {
                            t < &Rat::zero()
                        } else {
                            t > &Rat::zero()
                        }
                    }
                    VarState::AtUpper => {
                        if below {
                            t > &Rat::zero()
                        } else {
                            t < &Rat::zero()
                        }
                    }
                    VarState::FreeZero => true,
                    VarState::Basic => false,
                };
                if !ok {
                    continue;
                }
                let theta = (self.zrow[j].clone() / t.clone()).abs();
                let better = match &enter {
                    None => true,
                    Some((_, best)) => theta < *best,
                };
                if better {
                    enter = Some((j, theta));
                }
            }
            let Some((j, _)) = enter else {
                return Ok(false);
            };
            self.do_pivot(r, j, !below);
        }
    }
}

/// One-shot convenience wrapper.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    LpSolver::new(lp.clone()).solve()
}
