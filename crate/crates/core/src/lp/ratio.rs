//! Warm-started visibility evaluation for the optimizer's inner loop.
//!
//! With `s = 1 / v` the visibility LP becomes
//!
//! ```text
//! min s   s.t.   M mu - s N = S - N,   mu >= 0, s >= 0
//! ```
//!
//! where `M` is the 0/1 marginal matrix. The signal `S` only appears on the
//! right-hand side, so after a small change of the measurement angles the
//! previous optimal basis is still dual feasible and a handful of dual simplex
//! pivots restore optimality. Any basis made only of atom columns is dual
//! feasible, which gives a cold start without a phase one.
//!
//! Only linearly independent marginal rows are kept. This is exact for
//! no-signalling tables (every quantum table), which lie in the span of the
//! deterministic strategies. Signalling tables must go through
//! [`super::critical_visibility`].
//!
//! `s` is not bounded below by 1, so the returned visibility `1 / s` can
//! exceed 1 when the signal is itself local. The optimizer uses that extension
//! to get a slope on the plateau where the capped value is flat.

#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::instance::{atom_count, atom_rows};
use super::simplex::LpError;

const PRIMAL_TOL: f64 = 1e-10;
const DUAL_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 40;
const UNSELECTED: u32 = u32::MAX;

/// Shape-dependent data, shared between evaluators of the same `(m, d)`.
#[derive(Debug)]
pub struct LpShape {
    pub m: usize,
    pub d: usize,
    pub atoms: usize,
    /// Full marginal-row index of each kept row.
    pub selected: Vec<usize>,
    /// For each atom, `m^2` kept-row positions (`UNSELECTED` for dropped rows).
    atom_sel: Vec<u32>,
    cold_basis: Vec<usize>,
    cold_inverse: Vec<f64>,
}

type ShapeCache = Mutex<HashMap<(usize, usize), Arc<LpShape>>>;

impl LpShape {
    /// Cached per `(m, d)`.
    pub fn get(m: usize, d: usize) -> Arc<LpShape> {
        static CACHE: OnceLock<ShapeCache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(s) = cache.lock().unwrap().get(&(m, d)) {
            return s.clone();
        }
        let shape = Arc::new(Self::build(m, d));
        cache.lock().unwrap().insert((m, d), shape.clone());
        shape
    }

    fn build(m: usize, d: usize) -> Self {
        let atoms = atom_count(m, d);
        let nrows = m * m * d * d;
        let mut rows01 = vec![vec![0.0f64; atoms]; nrows];
        for j in 0..atoms {
            for r in atom_rows(j, m, d) {
                rows01[r][j] = 1.0;
            }
        }
        let selected = independent_vectors(&rows01);
        let mut row_pos = vec![UNSELECTED; nrows];
        for (p, &r) in selected.iter().enumerate() {
            row_pos[r] = p as u32;
        }
        let mut atom_sel = Vec::with_capacity(atoms * m * m);
        for j in 0..atoms {
            atom_sel.extend(atom_rows(j, m, d).map(|r| row_pos[r]));
        }
        let r = selected.len();
        let columns: Vec<Vec<f64>> = (0..atoms)
            .map(|j| {
                let mut c = vec![0.0; r];
                for &p in &atom_sel[j * m * m..(j + 1) * m * m] {
                    if p != UNSELECTED {
                        c[p as usize] = 1.0;
                    }
                }
                c
            })
            .collect();
        let cold_basis = independent_vectors(&columns);
        assert_eq!(cold_basis.len(), r, "marginal matrix rank mismatch");
        let mut b = vec![0.0; r * r];
        for (col, &j) in cold_basis.iter().enumerate() {
            for row in 0..r {
                b[row * r + col] = columns[j][row];
            }
        }
        let cold_inverse = invert(&b, r).expect("cold basis is nonsingular");
        Self {
            m,
            d,
            atoms,
            selected,
            atom_sel,
            cold_basis,
            cold_inverse,
        }
    }

    pub fn rank(&self) -> usize {
        self.selected.len()
    }

    #[inline]
    fn rows_of(&self, j: usize) -> &[u32] {
        let mm = self.m * self.m;
        &self.atom_sel[j * mm..(j + 1) * mm]
    }
}

/// Indices of a maximal linearly independent subset, greedy in input order.
fn independent_vectors(vectors: &[Vec<f64>]) -> Vec<usize> {
    let mut pivots: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut chosen = Vec::new();
    for (idx, v) in vectors.iter().enumerate() {
        let mut w = v.clone();
        for (pc, pv) in &pivots {
            let f = w[*pc];
            if f != 0.0 {
                for (x, y) in w.iter_mut().zip(pv) {
                    *x -= f * y;
                }
            }
        }
        let (pc, &big) = w
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap_or((0, &0.0));
        if big.abs() > 1e-9 {
            w.iter_mut().for_each(|x| *x /= big);
            pivots.push((pc, w));
            chosen.push(idx);
        }
    }
    chosen
}

/// Gauss-Jordan inverse of a row-major `n x n` matrix.
fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv =
            (col..n).max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))?;
        let pv = m[piv * n + col];
        if pv.abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(piv * n + c, col * n + c);
                inv.swap(piv * n + c, col * n + c);
            }
        }
        let s = 1.0 / pv;
        for c in 0..n {
            m[col * n + c] *= s;
            inv[col * n + c] *= s;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f != 0.0 {
                for c in 0..n {
                    m[r * n + c] -= f * m[col * n + c];
                    inv[r * n + c] -= f * inv[col * n + c];
                }
            }
        }
    }
    Some(inv)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvaluatorStats {
    pub solves: u64,
    pub pivots: u64,
    pub cold_starts: u64,
}

/// Warm-started solver of the `min s` form; one per optimization run.
#[derive(Debug, Clone)]
pub struct RatioEvaluator {
    shape: Arc<LpShape>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    warm: bool,
    binv: Vec<f64>,
    xb: Vec<f64>,
    rhs: Vec<f64>,
    ncol: Vec<f64>,
    alpha: Vec<f64>,
    pub stats: EvaluatorStats,
}

impl RatioEvaluator {
    pub fn new(m: usize, d: usize) -> Self {
        let shape = LpShape::get(m, d);
        let r = shape.rank();
        let atoms = shape.atoms;
        Self {
            basis: shape.cold_basis.clone(),
            is_basic: vec![false; atoms + 1],
            warm: false,
            binv: vec![0.0; r * r],
            xb: vec![0.0; r],
            rhs: vec![0.0; r],
            ncol: vec![0.0; r],
            alpha: vec![0.0; atoms + 1],
            stats: EvaluatorStats::default(),
            shape,
        }
    }

    pub fn shape(&self) -> &LpShape {
        &self.shape
    }

    /// Forget the warm basis.
    pub fn reset(&mut self) {
        self.warm = false;
    }

    fn column_into(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        if j == self.shape.atoms {
            out.copy_from_slice(&self.ncol);
        } else {
            for &p in self.shape.rows_of(j) {
                if p != UNSELECTED {
                    out[p as usize] = 1.0;
                }
            }
        }
    }

    fn refactor(&mut self) -> bool {
        let r = self.shape.rank();
        let mut b = vec![0.0; r * r];
        let mut col = vec![0.0; r];
        for (c, &j) in self.basis.iter().enumerate() {
            self.column_into(j, &mut col);
            for row in 0..r {
                b[row * r + c] = col[row];
            }
        }
        match invert(&b, r) {
            Some(inv) => {
                self.binv = inv;
                self.recompute_xb();
                true
            }
            None => false,
        }
    }

    fn recompute_xb(&mut self) {
        let r = self.shape.rank();
        for i in 0..r {
            self.xb[i] = self.binv[i * r..(i + 1) * r]
                .iter()
                .zip(&self.rhs)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    fn cold_start(&mut self) {
        self.basis.clone_from(&self.shape.cold_basis);
        self.binv.clone_from(&self.shape.cold_inverse);
        self.recompute_xb();
        self.stats.cold_starts += 1;
    }

    /// `pi = c_B B^-1`: the row of `B^-1` belonging to `s`, or zero.
    fn duals(&self) -> Option<&[f64]> {
        let r = self.shape.rank();
        let s = self.shape.atoms;
        self.basis
            .iter()
            .position(|&j| j == s)
            .map(|t| &self.binv[t * r..(t + 1) * r])
    }

    fn reduced_cost(&self, pi: Option<&[f64]>, j: usize) -> f64 {
        let Some(pi) = pi else {
            return if j == self.shape.atoms { 1.0 } else { 0.0 };
        };
        if j == self.shape.atoms {
            1.0 - pi.iter().zip(&self.ncol).map(|(a, b)| a * b).sum::<f64>()
        } else {
            -self
                .shape
                .rows_of(j)
                .iter()
                .filter(|&&p| p != UNSELECTED)
                .map(|&p| pi[p as usize])
                .sum::<f64>()
        }
    }

    fn dual_feasible(&mut self) -> bool {
        self.mark_basic();
        let pi = self.duals().map(|p| p.to_vec());
        (0..=self.shape.atoms)
            .filter(|&j| !self.is_basic[j])
            .all(|j| self.reduced_cost(pi.as_deref(), j) >= -DUAL_TOL)
    }

    fn mark_basic(&mut self) {
        self.is_basic.iter_mut().for_each(|b| *b = false);
        for &j in &self.basis {
            self.is_basic[j] = true;
        }
    }

    /// Returns `s* = 1 / v*`; `f64::INFINITY` when no `s` makes the mixture
    /// local (the visibility is 0), `0.0` when the signal equals the noise.
    pub fn solve_ratio(&mut self, signal: &[f64], noise: &[f64]) -> Result<f64, LpError> {
        let shape = self.shape.clone();
        let r = shape.rank();
        let atoms = shape.atoms;
        for (p, &row) in shape.selected.iter().enumerate() {
            self.rhs[p] = signal[row] - noise[row];
            self.ncol[p] = -noise[row];
        }
        if self.rhs.iter().all(|x| x.abs() <= 1e-12) {
            return Ok(0.0);
        }
        self.stats.solves += 1;
        let mut started = false;
        if self.warm && self.refactor() && self.dual_feasible() {
            started = true;
        }
        if !started {
            self.cold_start();
        }
        self.mark_basic();

        let limit = 50 * r + 200;
        let mut since_refactor = 0;
        let mut u = vec![0.0; r];
        let mut col = vec![0.0; r];
        for _ in 0..limit {
            // Leaving row: most negative basic value.
            let mut leave = None;
            let mut worst = -PRIMAL_TOL;
            for (i, &x) in self.xb.iter().enumerate() {
                if x < worst {
                    worst = x;
                    leave = Some(i);
                }
            }
            let Some(p) = leave else {
                if since_refactor > 0 {
                    // Confirm on a fresh factorization before accepting.
                    if !self.refactor() {
                        self.warm = false;
                        return Err(LpError::Numerical("singular basis".into()));
                    }
                    since_refactor = 0;
                    if self.xb.iter().any(|&x| x < -PRIMAL_TOL) {
                        continue;
                    }
                }
                self.warm = true;
                let s_pos = self.basis.iter().position(|&j| j == atoms);
                return Ok(s_pos.map_or(0.0, |t| self.xb[t].max(0.0)));
            };
            let rho = self.binv[p * r..(p + 1) * r].to_vec();
            let pi = self.duals().map(|x| x.to_vec());
            let mut enter = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0f64;
            for j in 0..=atoms {
                if self.is_basic[j] {
                    continue;
                }
                let a = if j == atoms {
                    rho.iter().zip(&self.ncol).map(|(x, y)| x * y).sum()
                } else {
                    shape
                        .rows_of(j)
                        .iter()
                        .filter(|&&q| q != UNSELECTED)
                        .map(|&q| rho[q as usize])
                        .sum::<f64>()
                };
                self.alpha[j] = a;
                if a < -PIVOT_TOL {
                    let ratio = self.reduced_cost(pi.as_deref(), j).max(0.0) / -a;
                    if ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12 && a.abs() > best_alpha)
                    {
                        best_ratio = best_ratio.min(ratio);
                        best_alpha = a.abs();
                        enter = Some(j);
                    }
                }
            }
            let Some(q) = enter else {
                self.warm = false;
                return Ok(f64::INFINITY);
            };
            self.column_into(q, &mut col);
            for i in 0..r {
                u[i] = self.binv[i * r..(i + 1) * r]
                    .iter()
                    .zip(&col)
                    .map(|(a, b)| a * b)
                    .sum();
            }
            let up = u[p];
            if (up - self.alpha[q]).abs() > 1e-7 * (1.0 + up.abs()) || up.abs() < PIVOT_TOL {
                if !self.refactor() {
                    self.cold_start();
                }
                since_refactor = 0;
                continue;
            }
            let theta = self.xb[p] / up;
            for i in 0..r {
                if i != p {
                    self.xb[i] -= theta * u[i];
                }
            }
            self.xb[p] = theta;
            let inv_up = 1.0 / up;
            for c in 0..r {
                self.binv[p * r + c] *= inv_up;
            }
            let prow = self.binv[p * r..(p + 1) * r].to_vec();
            for i in 0..r {
                if i != p && u[i] != 0.0 {
                    let f = u[i];
                    for c in 0..r {
                        self.binv[i * r + c] -= f * prow[c];
                    }
                }
            }
            self.is_basic[self.basis[p]] = false;
            self.is_basic[q] = true;
            self.basis[p] = q;
            self.stats.pivots += 1;
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                if !self.refactor() {
                    self.cold_start();
                    self.mark_basic();
                }
                since_refactor = 0;
            }
        }
        self.warm = false;
        Err(LpError::IterationLimit(limit))
    }

    /// Extended visibility `1 / s*`: above 1 when the signal is local, 0 when
    /// no positive visibility is local, infinite when signal equals noise.
    pub fn extended_visibility(&mut self, signal: &[f64], noise: &[f64]) -> Result<f64, LpError> {
        let s = self.solve_ratio(signal, noise)?;
        Ok(if s == 0.0 { f64::INFINITY } else { 1.0 / s })
    }

    /// Joint distribution `mu / s` from the last successful solve.
    pub fn witness(&self) -> Option<Vec<f64>> {
        let atoms = self.shape.atoms;
        let t = self.basis.iter().position(|&j| j == atoms)?;
        let s = self.xb[t];
        if s <= 0.0 {
            return None;
        }
        let mut w = vec![0.0; atoms];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < atoms {
                w[j] = self.xb[i].max(0.0) / s;
            }
        }
        Some(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_marginal_matrix() {
        // (1 + m (d - 1))^2 independent marginal rows.
        for (m, d) in [(2, 2), (2, 3), (3, 3), (2, 4)] {
            let shape = LpShape::get(m, d);
            assert_eq!(shape.rank(), (1 + m * (d - 1)).pow(2), "m={m} d={d}");
        }
    }

    #[test]
    fn inverse_is_correct() {
        let a = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let inv = invert(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
