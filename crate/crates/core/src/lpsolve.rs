//! Revised primal simplex for the master LP.
//!
//! The LP has the master-problem shape only: `T` capacity rows of the form
//! `sum usage * w <= capacity`, one convexity row `sum w = 1` per group, and
//! `w >= 0` (the upper bound of one is implied by convexity). The basis
//! inverse is kept dense and refactorized periodically; it is small
//! (`T + F` rows) compared to the number of columns.

use crate::error::{Error, Result};

/// Pivot-size tolerance.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced-cost optimality tolerance; tighter than the column generation
/// cutoff so any column priced out as improving is actually entered.
const OPT_TOL: f64 = 1e-9;
/// Phase-one residual above which the LP is declared infeasible.
const INFEASIBLE_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 64;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERACY_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LpColumn {
    /// Index of the convexity row the column belongs to.
    pub group: usize,
    pub cost: f64,
    /// Non-zero capacity-row coefficients as `(row, coefficient)`.
    pub usage: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    /// Right-hand sides of the capacity rows.
    pub capacity: Vec<f64>,
    /// Number of convexity rows.
    pub groups: usize,
    pub columns: Vec<LpColumn>,
}

impl LpProblem {
    fn validate(&self) -> Result<()> {
        for (j, c) in self.columns.iter().enumerate() {
            if c.group >= self.groups {
                return Err(Error::Solver(format!("column {j} references group {} of {}", c.group, self.groups)));
            }
            if let Some(&(row, _)) = c.usage.iter().find(|(row, _)| *row >= self.capacity.len()) {
                return Err(Error::Solver(format!("column {j} references capacity row {row}")));
            }
            if !c.cost.is_finite() || c.usage.iter().any(|(_, a)| !a.is_finite()) {
                return Err(Error::Solver(format!("column {j} has non-finite data")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisVar {
    Column(usize),
    Slack(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Column values; empty when infeasible.
    pub primal: Vec<f64>,
    /// Duals of the capacity rows (non-positive at optimum).
    pub pi: Vec<f64>,
    /// Duals of the convexity rows.
    pub beta: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<BasisVar>,
    pub pivots: usize,
}

impl LpSolution {
    /// Load of every capacity row under the primal solution.
    pub fn row_loads(&self, problem: &LpProblem) -> Vec<f64> {
        let mut load = vec![0.0; problem.capacity.len()];
        for (c, &w) in problem.columns.iter().zip(&self.primal) {
            for &(row, a) in &c.usage {
                load[row] += a * w;
            }
        }
        load
    }

    /// Objective of the dual at `(pi, beta)`.
    pub fn dual_objective(&self, problem: &LpProblem) -> f64 {
        let cap: f64 = problem.capacity.iter().zip(&self.pi).map(|(s, p)| s * p).sum();
        cap + self.beta.iter().sum::<f64>()
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    solve_lp_from(problem, None)
}

/// Solves starting from `start` when it is a valid primal-feasible basis,
/// otherwise from scratch with a phase-one on artificial convexity variables.
pub fn solve_lp_from(problem: &LpProblem, start: Option<&[BasisVar]>) -> Result<LpSolution> {
    problem.validate()?;
    let mut simplex = Simplex::new(problem);
    let warm = match start {
        Some(basis) => simplex.try_warm_start(basis),
        None => false,
    };
    if !warm {
        simplex.cold_start()?;
        simplex.run(Phase::One)?;
        let residual: f64 =
            (0..simplex.m).filter(|&i| simplex.is_artificial(simplex.basis[i])).map(|i| simplex.xb[i].max(0.0)).sum();
        if residual > INFEASIBLE_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                pi: Vec::new(),
                beta: Vec::new(),
                objective: f64::NAN,
                basis: Vec::new(),
                pivots: simplex.pivots,
            });
        }
        simplex.drive_out_artificials()?;
    }
    simplex.run(Phase::Two)?;
    Ok(simplex.solution())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

struct Simplex<'a> {
    p: &'a LpProblem,
    /// Capacity rows.
    t: usize,
    /// Structural columns.
    n: usize,
    /// Total rows.
    m: usize,
    /// Variable index per basis position: structural `0..n`, slacks
    /// `n..n+t`, artificials `n+t..n+m`.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    rhs: Vec<f64>,
    since_refactor: usize,
    pivots: usize,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem) -> Self {
        let t = p.capacity.len();
        let n = p.columns.len();
        let m = t + p.groups;
        let mut rhs = p.capacity.clone();
        rhs.extend(std::iter::repeat_n(1.0, p.groups));
        Simplex {
            p,
            t,
            n,
            m,
            basis: Vec::new(),
            is_basic: vec![false; n + m],
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            rhs,
            since_refactor: 0,
            pivots: 0,
        }
    }

    fn is_artificial(&self, var: usize) -> bool {
        var >= self.n + self.t
    }

    fn for_each_entry(&self, var: usize, mut f: impl FnMut(usize, f64)) {
        if var < self.n {
            let c = &self.p.columns[var];
            for &(row, a) in &c.usage {
                f(row, a);
            }
            f(self.t + c.group, 1.0);
        } else {
            // slack of row var-n, or artificial of convexity row
            f(var - self.n, 1.0);
        }
    }

    fn cost(&self, var: usize, phase: Phase) -> f64 {
        match phase {
            Phase::One => {
                if self.is_artificial(var) {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if var < self.n {
                    self.p.columns[var].cost
                } else {
                    0.0
                }
            }
        }
    }

    fn set_basis(&mut self, basis: Vec<usize>) {
        self.is_basic.iter_mut().for_each(|b| *b = false);
        for &v in &basis {
            self.is_basic[v] = true;
        }
        self.basis = basis;
    }

    fn cold_start(&mut self) -> Result<()> {
        let basis = (self.n..self.n + self.m).collect();
        self.set_basis(basis);
        self.refactor()
    }

    fn try_warm_start(&mut self, start: &[BasisVar]) -> bool {
        if start.len() != self.m {
            return false;
        }
        let mut basis = Vec::with_capacity(self.m);
        for &b in start {
            let var = match b {
                BasisVar::Column(j) if j < self.n => j,
                BasisVar::Slack(r) if r < self.t => self.n + r,
                _ => return false,
            };
            basis.push(var);
        }
        let mut sorted = basis.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.m {
            return false;
        }
        self.set_basis(basis);
        if self.refactor().is_err() {
            return false;
        }
        self.xb.iter().all(|&v| v >= -crate::FEASIBILITY_TOL)
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination with partial
    /// pivoting, then the basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (pos, &var) in self.basis.iter().enumerate() {
            self.for_each_entry(var, |row, v| a[row * m + pos] = v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let (piv, best) =
                (col..m)
                    .map(|r| (r, a[r * m + col].abs()))
                    .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < 1e-11 {
                return Err(Error::Solver(format!("singular basis at column {col} of {m}")));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r != col {
                    let factor = a[r * m + col];
                    if factor != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= factor * a[col * m + k];
                            inv[r * m + k] -= factor * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for i in 0..m {
            self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * self.rhs[k]).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn duals(&self, phase: Phase) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &var) in self.basis.iter().enumerate() {
            let c = self.cost(var, phase);
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &b) in y.iter_mut().zip(row) {
                    *yk += c * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, var: usize, y: &[f64], phase: Phase) -> f64 {
        let mut d = self.cost(var, phase);
        self.for_each_entry(var, |row, a| d -= y[row] * a);
        d
    }

    fn direction(&self, var: usize) -> Vec<f64> {
        let m = self.m;
        let mut u = vec![0.0; m];
        self.for_each_entry(var, |row, a| {
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += self.binv[i * m + row] * a;
            }
        });
        u
    }

    fn pivot(&mut self, r: usize, var: usize, u: &[f64], theta: f64) -> Result<()> {
        let m = self.m;
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * u[i];
            }
        }
        self.xb[r] = theta;
        let ur = u[r];
        for k in 0..m {
            self.binv[r * m + k] /= ur;
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for i in 0..m {
            if i != r && u[i] != 0.0 {
                let ui = u[i];
                for (b, &p) in self.binv[i * m..(i + 1) * m].iter_mut().zip(&pivot_row) {
                    *b -= ui * p;
                }
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[var] = true;
        self.basis[r] = var;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn run(&mut self, phase: Phase) -> Result<()> {
        let candidates = self.n + self.t;
        let limit = 50 * (self.m + self.n) + 1000;
        let mut degenerate = 0usize;
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            if iterations > limit {
                return Err(Error::Solver(format!(
                    "no convergence after {limit} iterations ({} rows, {} columns, phase {:?}, {} pivots)",
                    self.m, self.n, phase, self.pivots
                )));
            }
            let bland = degenerate >= DEGENERACY_LIMIT;
            let y = self.duals(phase);
            let mut entering = None;
            let mut best = -OPT_TOL;
            for var in 0..candidates {
                if self.is_basic[var] {
                    continue;
                }
                let d = self.reduced_cost(var, &y, phase);
                if bland {
                    if d < -OPT_TOL {
                        entering = Some(var);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(var);
                }
            }
            let Some(var) = entering else { return Ok(()) };

            let u = self.direction(var);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let ui = u[i];
                let theta = if phase == Phase::Two && self.is_artificial(self.basis[i]) {
                    // a redundant-row artificial must stay at zero
                    if ui.abs() > PIVOT_TOL {
                        0.0
                    } else {
                        continue;
                    }
                } else if ui > PIVOT_TOL {
                    self.xb[i].max(0.0) / ui
                } else {
                    continue;
                };
                leave = match leave {
                    None => Some((i, theta)),
                    Some((r, best_theta)) => {
                        if theta < best_theta - 1e-12 {
                            Some((i, theta))
                        } else if theta <= best_theta + 1e-12 {
                            let better = if bland { self.basis[i] < self.basis[r] } else { ui.abs() > u[r].abs() };
                            if better {
                                Some((i, theta))
                            } else {
                                Some((r, best_theta))
                            }
                        } else {
                            Some((r, best_theta))
                        }
                    }
                };
            }
            let Some((r, theta)) = leave else {
                return Err(Error::Solver(format!("unbounded direction on variable {var}")));
            };
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, var, &u, theta)?;
        }
    }

    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.m;
        for r in 0..m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let replacement = (0..self.n + self.t).find(|&var| {
                if self.is_basic[var] {
                    return false;
                }
                let mut v = 0.0;
                self.for_each_entry(var, |k, a| v += row[k] * a);
                v.abs() > 1e-7
            });
            if let Some(var) = replacement {
                let u = self.direction(var);
                self.xb[r] = 0.0;
                self.pivot(r, var, &u, 0.0)?;
            }
        }
        Ok(())
    }

    fn solution(&self) -> LpSolution {
        let y = self.duals(Phase::Two);
        let mut primal = vec![0.0; self.n];
        for (i, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                primal[var] = self.xb[i].max(0.0);
            }
        }
        let objective = self.p.columns.iter().zip(&primal).map(|(c, w)| c.cost * w).sum();
        let basis = self
            .basis
            .iter()
            .filter_map(|&var| {
                if var < self.n {
                    Some(BasisVar::Column(var))
                } else if var < self.n + self.t {
                    Some(BasisVar::Slack(var - self.n))
                } else {
                    None
                }
            })
            .collect();
        LpSolution {
            status: LpStatus::Optimal,
            primal,
            pi: y[..self.t].to_vec(),
            beta: y[self.t..].to_vec(),
            objective,
            basis,
            pivots: self.pivots,
        }
    }
}
