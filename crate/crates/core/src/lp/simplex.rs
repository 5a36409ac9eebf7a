//! Dense two-phase primal simplex.
//!
//! Problems are `min c.x` subject to equality and `<=` rows with `x >= 0`.
//! Pricing is Dantzig's rule; after a run of degenerate pivots the solver
//! switches to Bland's rule until the objective moves again, which rules out
//! cycling. Each phase ends by rebuilding the tableau from the original
//! rows, so accumulated rounding cannot fake optimality or infeasibility.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("problem is infeasible (phase-one residual {0:e})")]
    Infeasible(f64),
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    /// Sparse `(variable, coefficient)` pairs.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min objective . x` subject to `rows`, `x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
    /// Optional variable names, used by the text dump.
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.rows.push(Constraint {
            terms,
            relation,
            rhs,
        });
    }

    /// Multiplies row `r` (coefficients and right-hand side) by `factor`.
    pub fn scale_row(&mut self, r: usize, factor: f64) {
        let row = &mut self.rows[r];
        for t in &mut row.terms {
            t.1 *= factor;
        }
        row.rhs *= factor;
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Anything that can solve a [`LinearProgram`].
pub trait LpSolver: Send + Sync {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError>;
}

#[derive(Debug, Clone)]
pub struct DenseSimplex {
    /// Bound on the phase-one residual (sum of artificials) for feasibility.
    pub feasibility_tol: f64,
    /// Reduced costs above `-optimality_tol` count as nonnegative.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Slack on basic values in the Harris ratio test.
    pub harris_tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// Times a phase may rebuild its tableau from the original rows and resume.
    pub refactor_rounds: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-7,
            harris_tol: 1e-11,
            max_iterations: 100_000,
            degenerate_limit: 20,
            refactor_rounds: 4,
        }
    }
}

struct Tableau {
    rows: usize,
    width: usize, // columns + rhs
    cols: usize,
    a: Vec<f64>,
    cost: Vec<f64>, // reduced costs, last entry = -objective
    basis: Vec<usize>,
    active: Vec<bool>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.a[r * self.width + self.cols]
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.width;
        let inv = 1.0 / self.a[p * w + q];
        for v in &mut self.a[p * w..(p + 1) * w] {
            *v *= inv;
        }
        self.a[p * w + q] = 1.0;
        let (before, rest) = self.a.split_at_mut(p * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[q] = 0.0;
            }
        }
        let f = self.cost[q];
        if f != 0.0 {
            for (x, y) in self.cost.iter_mut().zip(prow.iter()) {
                *x -= f * y;
            }
            self.cost[q] = 0.0;
        }
        self.basis[p] = q;
    }

    /// Recomputes the tableau as `B^-1 [A | b]` from the original rows and
    /// the cost row from `c`, discarding rounding error accumulated by
    /// pivoting. Returns false (leaving the tableau alone) if the basis
    /// matrix is numerically singular.
    fn refactor(&mut self, orig: &[f64], c: &[f64]) -> bool {
        let (m, w) = (self.rows, self.width);
        let b = DMatrix::from_fn(m, m, |r, k| orig[r * w + self.basis[k]]);
        let full = DMatrix::from_fn(m, w, |r, j| orig[r * w + j]);
        let Some(sol) = b.lu().solve(&full) else {
            return false;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for r in 0..m {
            for j in 0..w {
                self.a[r * w + j] = sol[(r, j)];
            }
        }
        for r in 0..m {
            for k in 0..m {
                self.a[k * w + self.basis[r]] = if k == r { 1.0 } else { 0.0 };
            }
        }
        self.price(c);
        true
    }

    /// Sets the reduced costs for objective `c` under the current basis.
    fn price(&mut self, c: &[f64]) {
        let (m, w) = (self.rows, self.width);
        self.cost[..self.cols].copy_from_slice(c);
        self.cost[self.cols] = 0.0;
        for r in 0..m {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for j in 0..w {
                    self.cost[j] -= cb * self.a[r * w + j];
                }
            }
        }
        for r in 0..m {
            self.cost[self.basis[r]] = 0.0;
        }
    }
}

impl DenseSimplex {
    /// Leaving row for entering column `q` and its step length.
    ///
    /// In Bland mode: the minimum ratio, ties to the smallest basic index.
    /// Otherwise a two-pass Harris test: bound the step with every basic
    /// value relaxed by `harris_tol`, then take the largest pivot among
    /// rows whose exact ratio fits under that bound. Tiny pivots are what
    /// wreck a dense tableau, and badly scaled tables produce them.
    fn ratio_test(&self, t: &Tableau, q: usize, bland: bool) -> Option<(usize, f64)> {
        let candidates = || {
            (0..t.rows)
                .filter(|&r| t.active[r] && t.at(r, q) > self.pivot_tol)
                .map(|r| (r, t.at(r, q), t.rhs(r).max(0.0)))
        };
        if bland {
            let mut leave: Option<(usize, f64)> = None;
            for (r, arq, rhs) in candidates() {
                let ratio = rhs / arq;
                leave = match leave {
                    Some((l, best))
                        if ratio > best + 1e-12
                            || (ratio >= best - 1e-12 && t.basis[r] > t.basis[l]) =>
                    {
                        Some((l, best))
                    }
                    _ => Some((r, ratio)),
                };
            }
            return leave;
        }
        let bound = candidates()
            .map(|(_, arq, rhs)| (rhs + self.harris_tol) / arq)
            .fold(f64::INFINITY, f64::min);
        candidates()
            .filter(|&(_, arq, rhs)| rhs / arq <= bound)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(r, arq, rhs)| (r, rhs / arq))
    }

    /// Runs simplex iterations on the current cost row over columns allowed by
    /// `eligible`. Returns the number of pivots.
    fn iterate(
        &self,
        t: &mut Tableau,
        eligible: &dyn Fn(usize) -> bool,
        budget: &mut usize,
    ) -> Result<usize, LpError> {
        let mut pivots = 0;
        let mut degenerate_run = 0;
        loop {
            let bland = degenerate_run >= self.degenerate_limit;
            let mut enter = None;
            let mut best = -self.optimality_tol;
            for j in 0..t.cols {
                if !eligible(j) {
                    continue;
                }
                let dj = t.cost[j];
                if dj < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(q) = enter else {
                return Ok(pivots);
            };
            let Some((p, best_ratio)) = self.ratio_test(t, q, bland) else {
                return Err(LpError::Unbounded);
            };
            if best_ratio * t.cost[q].abs() <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            t.pivot(p, q);
            pivots += 1;
            if *budget == 0 {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            *budget -= 1;
        }
    }
}

impl DenseSimplex {
    /// Prices `c`, iterates to optimality, then refactors and
    /// resumes until a clean tableau confirms the basis.
    fn run_phase(
        &self,
        t: &mut Tableau,
        orig: &[f64],
        c: &[f64],
        eligible: &dyn Fn(usize) -> bool,
        budget: &mut usize,
    ) -> Result<usize, LpError> {
        t.price(c);
        let mut pivots = self.iterate(t, eligible, budget)?;
        for _ in 0..self.refactor_rounds {
            if pivots == 0 {
                break;
            }
            if !t.refactor(orig, c) {
                return Err(LpError::Numerical("singular basis".into()));
            }
            let more = self.iterate(t, eligible, budget)?;
            pivots += more;
            if more == 0 {
                break;
            }
        }
        Ok(pivots)
    }
}

impl LpSolver for DenseSimplex {
    /// Solves `lp`. An infeasible or numerically broken result is retried
    /// once with Bland's rule throughout, which pivots more conservatively.
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        match self.solve_once(lp) {
            Err(LpError::Infeasible(_) | LpError::Numerical(_)) if self.degenerate_limit > 0 => {
                DenseSimplex {
                    degenerate_limit: 0,
                    ..self.clone()
                }
                .solve_once(lp)
            }
            r => r,
        }
    }
}

impl DenseSimplex {
    fn solve_once(&self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let n = lp.num_vars();
        let m = lp.rows.len();
        let n_slack = lp
            .rows
            .iter()
            .filter(|r| r.relation == Relation::Le)
            .count();
        let mut needs_art = vec![false; m];
        for (r, row) in lp.rows.iter().enumerate() {
            needs_art[r] = row.relation == Relation::Eq || row.rhs < 0.0;
        }
        let n_art = needs_art.iter().filter(|&&x| x).count();
        let cols = n + n_slack + n_art;
        let width = cols + 1;
        let mut t = Tableau {
            rows: m,
            width,
            cols,
            a: vec![0.0; m * width],
            cost: vec![0.0; width],
            basis: vec![0; m],
            active: vec![true; m],
        };
        let mut slack = n;
        let mut art = n + n_slack;
        for (r, row) in lp.rows.iter().enumerate() {
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            for &(j, c) in &row.terms {
                if j >= n || !c.is_finite() {
                    return Err(LpError::Numerical(format!(
                        "bad term ({j}, {c}) in row {r}"
                    )));
                }
                t.a[r * width + j] += sign * c;
            }
            t.a[r * width + cols] = sign * row.rhs;
            if row.relation == Relation::Le {
                t.a[r * width + slack] = sign;
                if !needs_art[r] {
                    t.basis[r] = slack;
                }
                slack += 1;
            }
            if needs_art[r] {
                t.a[r * width + art] = 1.0;
                t.basis[r] = art;
                art += 1;
            }
        }
        let first_art = n + n_slack;
        let mut budget = self.max_iterations;
        let mut iterations = 0;

        let orig = t.a.clone();

        // Phase one: minimize the sum of artificials.
        if n_art > 0 {
            let mut c = vec![0.0; cols];
            c[first_art..].fill(1.0);
            iterations += self.run_phase(&mut t, &orig, &c, &|j| j < first_art, &mut budget)?;
            let residual: f64 = (0..m)
                .filter(|&r| t.basis[r] >= first_art)
                .map(|r| t.rhs(r).abs())
                .sum();
            if residual > self.feasibility_tol {
                return Err(LpError::Infeasible(residual));
            }
            // Drive remaining artificials out; rows with nothing to pivot on are redundant.
            for r in 0..m {
                if t.basis[r] < first_art {
                    continue;
                }
                let mut best = None;
                let mut best_abs = 1e-9;
                for j in 0..first_art {
                    let v = t.at(r, j).abs();
                    if v > best_abs {
                        best_abs = v;
                        best = Some(j);
                    }
                }
                match best {
                    Some(q) => t.pivot(r, q),
                    None => t.active[r] = false,
                }
            }
        }

        // Phase two.
        let mut c = vec![0.0; cols];
        c[..n].copy_from_slice(&lp.objective);
        iterations += self.run_phase(&mut t, &orig, &c, &|j| j < first_art, &mut budget)?;

        let mut x = vec![0.0; n];
        for r in 0..m {
            if t.active[r] && t.basis[r] < n {
                x[t.basis[r]] = t.rhs(r);
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Numerical("non-finite primal value".into()));
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective,
            iterations,
        })
    }
}
