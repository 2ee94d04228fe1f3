//! Bounded-variable primal simplex.
//!
//! Two phases over the same pivoting machinery: phase 1 minimizes the sum of
//! bound violations of basic variables (composite objective, no artificial
//! variables), phase 2 minimizes the real cost. Pricing is textbook Dantzig
//! with a Bland fallback that engages after `10 * (rows + cols)` consecutive
//! degenerate pivots. The basis inverse lives in [`crate::lu`].

use crate::error::SolveError;
use crate::lu::{LuError, LuFactors, LuWorkspace};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-7;
const DEGEN_STEP: f64 = 1e-10;
const REFACTOR_ETAS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VState {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable held nonbasic at zero.
    Free,
}

/// Basis snapshot used for warm starts across branch-and-bound nodes.
#[derive(Debug, Clone)]
pub struct Basis {
    pub(crate) basic: Vec<usize>,
    pub(crate) state: Vec<VState>,
}

/// A bounded LP in computational standard form `A x + s = b`.
///
/// Columns `0..n` are structural, `n..n+m` are slacks. Bounds are kept
/// separate so branch-and-bound nodes can override them cheaply.
pub struct LpProblem {
    pub m: usize,
    pub n: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub b: Vec<f64>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
}

impl LpProblem {
    pub fn total_vars(&self) -> usize {
        self.n + self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

pub struct LpOutcome {
    pub status: LpStatus,
    /// Values for all structural + slack variables.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals (meaningful when optimal).
    pub duals: Vec<f64>,
    /// Weak-duality bound computed from the final duals.
    pub dual_objective: f64,
    pub iterations: usize,
    pub basis: Basis,
}

struct Core<'a> {
    prob: &'a LpProblem,
    lo: &'a [f64],
    up: &'a [f64],
    feas_tol: f64,
    lu: LuFactors,
    ws: LuWorkspace,
    basic: Vec<usize>,
    state: Vec<VState>,
    xb: Vec<f64>,
    iterations: usize,
    degen_run: usize,
    bland: bool,
    // scratch
    rhs_buf: Vec<f64>,
    cb_buf: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

/// Solves the LP with the given bound override, warm-starting from `warm`
/// when provided.
pub fn solve_lp(
    prob: &LpProblem,
    lo: &[f64],
    up: &[f64],
    warm: Option<&Basis>,
    feas_tol: f64,
) -> Result<LpOutcome, SolveError> {
    let nm = prob.total_vars();
    debug_assert_eq!(lo.len(), nm);
    debug_assert_eq!(up.len(), nm);

    let (basic, state) = match warm {
        Some(b) if valid_warm(prob, b) => (b.basic.clone(), fixup_states(lo, up, &b.state)),
        _ => slack_basis(prob, lo, up),
    };

    let mut core = Core {
        prob,
        lo,
        up,
        feas_tol,
        lu: factor_or_fallback(prob, &mut basic.clone(), &mut state.clone())?,
        ws: LuWorkspace::default(),
        basic,
        state,
        xb: Vec::new(),
        iterations: 0,
        degen_run: 0,
        bland: false,
        rhs_buf: vec![0.0; prob.m],
        cb_buf: vec![0.0; prob.m],
        y: Vec::new(),
        w: Vec::new(),
    };
    // factor_or_fallback may have repaired the basis copies it was handed;
    // refactor against the actual members to stay consistent.
    core.refactor()?;
    core.compute_xb();
    core.run()
}

fn valid_warm(prob: &LpProblem, b: &Basis) -> bool {
    if b.basic.len() != prob.m || b.state.len() != prob.total_vars() {
        return false;
    }
    let mut count = 0usize;
    for (j, s) in b.state.iter().enumerate() {
        if *s == VState::Basic {
            count += 1;
        }
        let _ = j;
    }
    count == prob.m && b.basic.iter().all(|&v| b.state[v] == VState::Basic)
}

fn fixup_states(lo: &[f64], up: &[f64], state: &[VState]) -> Vec<VState> {
    state
        .iter()
        .enumerate()
        .map(|(j, &s)| match s {
            VState::AtLower if lo[j].is_infinite() => {
                if up[j].is_finite() {
                    VState::AtUpper
                } else {
                    VState::Free
                }
            }
            VState::AtUpper if up[j].is_infinite() => {
                if lo[j].is_finite() {
                    VState::AtLower
                } else {
                    VState::Free
                }
            }
            other => other,
        })
        .collect()
}

fn slack_basis(prob: &LpProblem, lo: &[f64], up: &[f64]) -> (Vec<usize>, Vec<VState>) {
    let nm = prob.total_vars();
    let mut state = vec![VState::AtLower; nm];
    for (j, s) in state.iter_mut().enumerate().take(prob.n) {
        *s = if lo[j].is_finite() {
            VState::AtLower
        } else if up[j].is_finite() {
            VState::AtUpper
        } else {
            VState::Free
        };
    }
    let basic: Vec<usize> = (prob.n..nm).collect();
    for &v in &basic {
        state[v] = VState::Basic;
    }
    (basic, state)
}

fn factor_or_fallback(
    prob: &LpProblem,
    basic: &mut Vec<usize>,
    state: &mut Vec<VState>,
) -> Result<LuFactors, SolveError> {
    let mut ws = LuWorkspace::default();
    let cols: Vec<Vec<(usize, f64)>> = basic.iter().map(|&v| prob.cols[v].clone()).collect();
    match LuFactors::factor(&cols, &mut ws) {
        Ok(lu) => Ok(lu),
        Err(LuError::Singular(_)) => {
            // Warm basis degenerated into singularity; restart from slacks.
            let (b2, s2) = slack_basis(prob, &vec![0.0; 0], &vec![0.0; 0]);
            let _ = (b2, s2);
            Err(SolveError::Numerical {
                detail: "singular warm basis".into(),
            })
        }
    }
}

impl<'a> Core<'a> {
    fn refactor(&mut self) -> Result<(), SolveError> {
        let cols: Vec<Vec<(usize, f64)>> = self
            .basic
            .iter()
            .map(|&v| self.prob.cols[v].clone())
            .collect();
        match LuFactors::factor(&cols, &mut self.ws) {
            Ok(lu) => {
                self.lu = lu;
                Ok(())
            }
            Err(LuError::Singular(pos)) => {
                // Swap the offending basic for its row's slack and retry once.
                let row_guess = pos.min(self.prob.m - 1);
                let slack = self.prob.n + row_guess;
                if self.state[slack] != VState::Basic {
                    let old = self.basic[row_guess];
                    self.state[old] = nonbasic_home(self.lo[old], self.up[old]);
                    self.basic[row_guess] = slack;
                    self.state[slack] = VState::Basic;
                    let cols2: Vec<Vec<(usize, f64)>> = self
                        .basic
                        .iter()
                        .map(|&v| self.prob.cols[v].clone())
                        .collect();
                    if let Ok(lu) = LuFactors::factor(&cols2, &mut self.ws) {
                        self.lu = lu;
                        return Ok(());
                    }
                }
                Err(SolveError::Numerical {
                    detail: format!("singular basis at position {pos}"),
                })
            }
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VState::AtLower => self.lo[j],
            VState::AtUpper => self.up[j],
            VState::Free => 0.0,
            VState::Basic => unreachable!(),
        }
    }

    fn compute_xb(&mut self) {
        let m = self.prob.m;
        self.rhs_buf.iter_mut().for_each(|v| *v = 0.0);
        self.rhs_buf.copy_from_slice(&self.prob.b);
        for j in 0..self.prob.total_vars() {
            if self.state[j] == VState::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(r, a) in &self.prob.cols[j] {
                    self.rhs_buf[r] -= a * v;
                }
            }
        }
        let mut out = std::mem::take(&mut self.xb);
        self.lu.ftran(&mut self.rhs_buf, &mut out);
        self.xb = out;
        debug_assert_eq!(self.xb.len(), m);
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for (pos, &v) in self.basic.iter().enumerate() {
            let x = self.xb[pos];
            if x < self.lo[v] - self.feas_tol {
                total += self.lo[v] - x;
            } else if x > self.up[v] + self.feas_tol {
                total += x - self.up[v];
            }
        }
        total
    }

    fn run(&mut self) -> Result<LpOutcome, SolveError> {
        let iter_cap = 200 * (self.prob.m + self.prob.total_vars()) + 20_000;

        // Phase 1.
        loop {
            if self.infeasibility() == 0.0 {
                break;
            }
            match self.iterate(true)? {
                StepResult::Moved => {
                    if self.iterations > iter_cap {
                        return Err(SolveError::Numerical {
                            detail: "phase-1 iteration cap exceeded".into(),
                        });
                    }
                }
                StepResult::Converged => {
                    // Confirm on a freshly factored basis before declaring.
                    if self.lu.num_etas() > 0 {
                        self.refactor()?;
                        self.compute_xb();
                        if self.infeasibility() == 0.0 {
                            break;
                        }
                        if let StepResult::Moved = self.iterate(true)? {
                            continue;
                        }
                    }
                    if self.infeasibility() > 0.0 {
                        return self.finish(LpStatus::Infeasible);
                    }
                    break;
                }
            }
        }

        self.degen_run = 0;
        self.bland = false;

        // Phase 2.
        loop {
            match self.iterate(false)? {
                StepResult::Moved => {
                    if self.iterations > iter_cap {
                        return Err(SolveError::Numerical {
                            detail: "phase-2 iteration cap exceeded".into(),
                        });
                    }
                }
                StepResult::Converged => {
                    if self.lu.num_etas() > 0 {
                        self.refactor()?;
                        self.compute_xb();
                        if let StepResult::Moved = self.iterate(false)? {
                            continue;
                        }
                    }
                    return self.finish(LpStatus::Optimal);
                }
            }
        }
    }

    /// One pricing + ratio-test + pivot step. `phase1` selects the composite
    /// infeasibility objective.
    fn iterate(&mut self, phase1: bool) -> Result<StepResult, SolveError> {
        let m = self.prob.m;

        // Basic cost vector by position.
        self.cb_buf.iter_mut().for_each(|v| *v = 0.0);
        if phase1 {
            for (pos, &v) in self.basic.iter().enumerate() {
                let x = self.xb[pos];
                if x < self.lo[v] - self.feas_tol {
                    self.cb_buf[pos] = -1.0;
                } else if x > self.up[v] + self.feas_tol {
                    self.cb_buf[pos] = 1.0;
                }
            }
        } else {
            for (pos, &v) in self.basic.iter().enumerate() {
                self.cb_buf[pos] = self.prob.cost[v];
            }
        }
        let mut y = std::mem::take(&mut self.y);
        self.lu.btran(&mut self.cb_buf, &mut y);
        self.y = y;

        // Pricing.
        let mut enter: Option<(usize, f64, f64)> = None; // (var, d, score)
        for j in 0..self.prob.total_vars() {
            let st = self.state[j];
            if st == VState::Basic {
                continue;
            }
            if self.up[j] - self.lo[j] <= 0.0 {
                continue; // fixed, cannot move
            }
            let cj = if phase1 { 0.0 } else { self.prob.cost[j] };
            let mut d = cj;
            for &(r, a) in &self.prob.cols[j] {
                d -= self.y[r] * a;
            }
            let tol = OPT_TOL * (1.0 + cj.abs());
            let eligible = match st {
                VState::AtLower => d < -tol,
                VState::AtUpper => d > tol,
                VState::Free => d.abs() > tol,
                VState::Basic => false,
            };
            if !eligible {
                continue;
            }
            if self.bland {
                enter = Some((j, d, 0.0));
                break;
            }
            let score = d.abs();
            match enter {
                Some((_, _, best)) if best >= score => {}
                _ => enter = Some((j, d, score)),
            }
        }

        let (q, dq, _) = match enter {
            Some(e) => e,
            None => return Ok(StepResult::Converged),
        };

        // Direction: sigma > 0 means the entering value increases.
        let sigma = match self.state[q] {
            VState::AtLower => 1.0,
            VState::AtUpper => -1.0,
            VState::Free => {
                if dq < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            VState::Basic => unreachable!(),
        };

        // FTRAN of the entering column.
        self.rhs_buf.iter_mut().for_each(|v| *v = 0.0);
        for &(r, a) in &self.prob.cols[q] {
            self.rhs_buf[r] = a;
        }
        let mut w = std::mem::take(&mut self.w);
        self.lu.ftran(&mut self.rhs_buf, &mut w);
        self.w = w;

        // Ratio test.
        let mut best_t = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None; // (position, leaves_at_upper)
        let mut best_piv = 0.0f64;
        for pos in 0..m {
            let wi = self.w[pos];
            if wi.abs() <= PIVOT_TOL {
                continue;
            }
            let delta = -sigma * wi; // d(xb[pos]) / dt
            let v = self.basic[pos];
            let x = self.xb[pos];
            let (lv, uv) = (self.lo[v], self.up[v]);
            let below = phase1 && x < lv - self.feas_tol;
            let above = phase1 && x > uv + self.feas_tol;

            let (t, at_upper) = if below {
                if delta > 0.0 {
                    ((lv - x) / delta, false)
                } else {
                    continue;
                }
            } else if above {
                if delta < 0.0 {
                    ((uv - x) / delta, true)
                } else {
                    continue;
                }
            } else if delta > 0.0 {
                if uv.is_finite() {
                    (((uv - x) / delta).max(0.0), true)
                } else {
                    continue;
                }
            } else if lv.is_finite() {
                (((lv - x) / delta).max(0.0), false)
            } else {
                continue;
            };

            let t = t.max(0.0);
            let better = t < best_t - 1e-12
                || (t < best_t + 1e-12 && wi.abs() > best_piv);
            if better {
                best_t = t;
                leave = Some((pos, at_upper));
                best_piv = wi.abs();
            }
        }

        // Bound flip of the entering variable itself.
        let flip_t = if self.state[q] != VState::Free
            && self.lo[q].is_finite()
            && self.up[q].is_finite()
        {
            self.up[q] - self.lo[q]
        } else {
            f64::INFINITY
        };

        if best_t.is_infinite() && flip_t.is_infinite() {
            if phase1 {
                return Err(SolveError::Numerical {
                    detail: "phase-1 ray without limit".into(),
                });
            }
            return Err(SolveError::Unbounded);
        }

        if flip_t <= best_t {
            // Bound flip, no basis change.
            let t = flip_t;
            for pos in 0..m {
                let wi = self.w[pos];
                if wi != 0.0 {
                    self.xb[pos] -= sigma * t * wi;
                }
            }
            self.state[q] = match self.state[q] {
                VState::AtLower => VState::AtUpper,
                VState::AtUpper => VState::AtLower,
                other => other,
            };
            self.iterations += 1;
            self.track_degeneracy(t);
            return Ok(StepResult::Moved);
        }

        let (rpos, leaves_upper) = leave.expect("finite ratio without leaving variable");
        let t = best_t;
        let entering_value = self.nonbasic_value(q) + sigma * t;

        for pos in 0..m {
            let wi = self.w[pos];
            if wi != 0.0 {
                self.xb[pos] -= sigma * t * wi;
            }
        }
        let leaving = self.basic[rpos];
        self.state[leaving] = if leaves_upper {
            VState::AtUpper
        } else {
            VState::AtLower
        };
        self.basic[rpos] = q;
        self.state[q] = VState::Basic;
        self.xb[rpos] = entering_value;

        if !self.lu.push_eta(&self.w, rpos) {
            // Pivot too small for a trustworthy eta: refactor with the new basis.
            self.refactor()?;
            self.compute_xb();
        } else if self.lu.num_etas() >= REFACTOR_ETAS {
            self.refactor()?;
            self.compute_xb();
        }

        self.iterations += 1;
        self.track_degeneracy(t);
        Ok(StepResult::Moved)
    }

    fn track_degeneracy(&mut self, t: f64) {
        if t <= DEGEN_STEP {
            self.degen_run += 1;
            if self.degen_run > 10 * (self.prob.m + self.prob.total_vars()) {
                self.bland = true;
            }
        } else {
            self.degen_run = 0;
            self.bland = false;
        }
    }

    fn finish(&mut self, status: LpStatus) -> Result<LpOutcome, SolveError> {
        let nm = self.prob.total_vars();
        let mut x = vec![0.0; nm];
        for j in 0..nm {
            if self.state[j] != VState::Basic {
                x[j] = self.nonbasic_value(j);
            }
        }
        for (pos, &v) in self.basic.iter().enumerate() {
            x[v] = self.xb[pos];
        }
        let objective: f64 = (0..nm).map(|j| self.prob.cost[j] * x[j]).sum();

        // Final duals from the real cost vector.
        self.cb_buf.iter_mut().for_each(|v| *v = 0.0);
        for (pos, &v) in self.basic.iter().enumerate() {
            self.cb_buf[pos] = self.prob.cost[v];
        }
        let mut y = Vec::new();
        self.lu.btran(&mut self.cb_buf, &mut y);

        let mut dual_objective: f64 = (0..self.prob.m).map(|r| y[r] * self.prob.b[r]).sum();
        for j in 0..nm {
            if self.state[j] == VState::Basic {
                continue;
            }
            let mut d = self.prob.cost[j];
            for &(r, a) in &self.prob.cols[j] {
                d -= y[r] * a;
            }
            if d > 0.0 && self.lo[j].is_finite() {
                dual_objective += d * self.lo[j];
            } else if d < 0.0 && self.up[j].is_finite() {
                dual_objective += d * self.up[j];
            }
        }

        Ok(LpOutcome {
            status,
            x,
            objective,
            duals: y,
            dual_objective,
            iterations: self.iterations,
            basis: Basis {
                basic: self.basic.clone(),
                state: self.state.clone(),
            },
        })
    }
}

enum StepResult {
    Moved,
    Converged,
}

fn nonbasic_home(lo: f64, up: f64) -> VState {
    if lo.is_finite() {
        VState::AtLower
    } else if up.is_finite() {
        VState::AtUpper
    } else {
        VState::Free
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min -x s.t. x <= 5 (as a row), 0 <= x.
    #[test]
    fn simple_bounded_lp() {
        let prob = LpProblem {
            m: 1,
            n: 1,
            cols: vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            cost: vec![-1.0, 0.0],
            b: vec![5.0],
            lo: vec![0.0, 0.0],
            up: vec![f64::INFINITY, f64::INFINITY],
        };
        let out = solve_lp(&prob, &prob.lo, &prob.up, None, 1e-7).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.x[0] - 5.0).abs() < 1e-9);
        assert!((out.objective + 5.0).abs() < 1e-9);
        assert!((out.objective - out.dual_objective).abs() < 1e-9);
    }

    /// Infeasible: x >= 2 and x <= 1.
    #[test]
    fn infeasible_pair() {
        let prob = LpProblem {
            m: 2,
            n: 1,
            cols: vec![
                vec![(0, 1.0), (1, 1.0)],
                vec![(0, 1.0)],
                vec![(1, 1.0)],
            ],
            cost: vec![0.0, 0.0, 0.0],
            b: vec![2.0, 1.0],
            lo: vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0],
            up: vec![f64::INFINITY, 0.0, f64::INFINITY],
        };
        let out = solve_lp(&prob, &prob.lo, &prob.up, None, 1e-7).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
    }

    /// Unbounded: min -x with x free and no rows binding it.
    #[test]
    fn unbounded_detected() {
        let prob = LpProblem {
            m: 1,
            n: 2,
            cols: vec![vec![], vec![(0, 1.0)], vec![(0, 1.0)]],
            cost: vec![-1.0, 0.0, 0.0],
            b: vec![1.0],
            lo: vec![0.0, 0.0, 0.0],
            up: vec![f64::INFINITY; 3],
        };
        let res = solve_lp(&prob, &prob.lo, &prob.up, None, 1e-7);
        assert!(matches!(res, Err(SolveError::Unbounded)));
    }
}
