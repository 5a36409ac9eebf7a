use num_complex::Complex64;

use super::{CMatrix, ObservableSpec, QuditState};
use crate::{Error, Result};

pub const NEGATIVE_CLAMP_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// `P(a, b | i, k)` for `m` settings per side and `d` outcomes per setting.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    m: usize,
    d: usize,
    data: Vec<f64>,
}

impl ProbabilityTable {
    /// Validates and clamps: entries in `[-1e-12, 0)` become 0, anything more
    /// negative is an error, and each `(i, k)` block must sum to 1 within 1e-9.
    pub fn new(m: usize, d: usize, mut data: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidTable("need at least one setting".into()));
        }
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let want = m * m * d * d;
        if data.len() != want {
            return Err(Error::InvalidTable(format!(
                "expected {want} entries, got {}",
                data.len()
            )));
        }
        for (n, p) in data.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidTable(format!("entry {n} is not finite")));
            }
            if *p < 0.0 {
                if *p < -NEGATIVE_CLAMP_TOL {
                    return Err(Error::InvalidTable(format!(
                        "entry {n} is negative ({p:e})"
                    )));
                }
                *p = 0.0;
            }
        }
        for (block, chunk) in data.chunks(d * d).enumerate() {
            let s: f64 = chunk.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidTable(format!(
                    "setting pair ({}, {}) sums to {s}",
                    block / m,
                    block % m
                )));
            }
        }
        Ok(Self { m, d, data })
    }

    /// Every `(i, k)` block uniform, `1 / d^2`.
    pub fn uniform(m: usize, d: usize) -> Result<Self> {
        Self::new(m, d, vec![1.0 / (d * d) as f64; m * m * d * d])
    }

    pub fn settings(&self) -> usize {
        self.m
    }

    pub fn outcomes(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn index(&self, i: usize, k: usize, a: usize, b: usize) -> usize {
        ((i * self.m + k) * self.d + a) * self.d + b
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, a: usize, b: usize) -> f64 {
        self.data[self.index(i, k, a, b)]
    }

    /// Flat entries in `(i, k, a, b)` row-major order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.m == other.m && self.d == other.d
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Relabels outcomes: `a -> perm_a[i][a]`, `b -> perm_b[k][b]`.
    pub fn relabeled(&self, perm_a: &[Vec<usize>], perm_b: &[Vec<usize>]) -> Self {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.m {
            for k in 0..self.m {
                for a in 0..self.d {
                    for b in 0..self.d {
                        out[self.index(i, k, perm_a[i][a], perm_b[k][b])] = self.get(i, k, a, b);
                    }
                }
            }
        }
        Self {
            m: self.m,
            d: self.d,
            data: out,
        }
    }
}

/// Entrywise `v * signal + (1 - v) * noise`.
pub fn mix_tables(
    signal: &ProbabilityTable,
    noise: &ProbabilityTable,
    v: f64,
) -> Result<ProbabilityTable> {
    if !signal.same_shape(noise) {
        return Err(Error::ShapeMismatch(format!(
            "signal is (m={}, d={}), noise is (m={}, d={})",
            signal.m, signal.d, noise.m, noise.d
        )));
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VisibilityOutOfRange(v));
    }
    let data = signal
        .data
        .iter()
        .zip(&noise.data)
        .map(|(s, n)| v * s + (1.0 - v) * n)
        .collect();
    ProbabilityTable::new(signal.m, signal.d, data)
}

/// Born-rule table `<ab| (U_A (x) U_B) rho (U_A (x) U_B)^dag |ab>`.
pub fn probability_table(
    state: &QuditState,
    alice: &[ObservableSpec],
    bob: &[ObservableSpec],
) -> Result<ProbabilityTable> {
    let d = state.dim();
    if alice.is_empty() || alice.len() != bob.len() {
        return Err(Error::Scenario(format!(
            "need the same nonzero number of settings per side, got {} and {}",
            alice.len(),
            bob.len()
        )));
    }
    if let Some(s) = alice.iter().chain(bob).find(|s| s.dim != d) {
        return Err(Error::Scenario(format!(
            "observable has d={}, state has d={d}",
            s.dim
        )));
    }
    let ua: Vec<CMatrix> = alice.iter().map(ObservableSpec::compile).collect();
    let ub: Vec<CMatrix> = bob.iter().map(ObservableSpec::compile).collect();
    table_from_unitaries(state, &ua, &ub)
}

pub fn table_from_unitaries(
    state: &QuditState,
    ua: &[CMatrix],
    ub: &[CMatrix],
) -> Result<ProbabilityTable> {
    let m = ua.len();
    let d = state.dim();
    let mut data = vec![0.0; m * m * d * d];
    BornKernel::new(state).fill(ua, ub, &mut data);
    ProbabilityTable::new(m, d, data)
}

/// Precomputed state data for repeated table evaluation.
#[derive(Debug, Clone)]
pub(crate) enum BornKernel {
    /// Amplitudes as `psi[j][k]`.
    Pure(CMatrix),
    Mixed(CMatrix),
}

impl BornKernel {
    pub fn new(state: &QuditState) -> Self {
        match state.amplitude_matrix() {
            Some(psi) => Self::Pure(psi),
            None => Self::Mixed(state.density_matrix()),
        }
    }

    /// Writes the table into `out` (length `m^2 d^2`), no validation.
    pub fn fill(&self, ua: &[CMatrix], ub: &[CMatrix], out: &mut [f64]) {
        let m = ua.len();
        match self {
            Self::Pure(psi) => {
                let d = psi.nrows();
                let left: Vec<CMatrix> = ua.iter().map(|u| u * psi).collect();
                for (i, l) in left.iter().enumerate() {
                    for (k, u_b) in ub.iter().enumerate() {
                        let phi = l * u_b.transpose();
                        let base = (i * m + k) * d * d;
                        for a in 0..d {
                            for b in 0..d {
                                out[base + a * d + b] = phi[(a, b)].norm_sqr();
                            }
                        }
                    }
                }
            }
            Self::Mixed(rho) => {
                let dd = rho.nrows();
                for (i, u_a) in ua.iter().enumerate() {
                    for (k, u_b) in ub.iter().enumerate() {
                        let w = u_a.kronecker(u_b);
                        let wr = &w * rho;
                        let base = (i * m + k) * dd;
                        for x in 0..dd {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for z in 0..dd {
                                acc += wr[(x, z)] * w[(x, z)].conj();
                            }
                            out[base + x] = acc.re;
                        }
                    }
                }
            }
        }
    }
}
