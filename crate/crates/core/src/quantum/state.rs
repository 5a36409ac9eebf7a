use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::CMatrix;
use crate::{Error, Result};

pub const PURE_NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

/// Which side of the bipartition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    A,
    B,
}

#[derive(Debug, Clone)]
enum Repr {
    Pure(DVector<Complex64>),
    Mixed(CMatrix),
}

/// A state of two `d`-level systems. Basis index of `|j k>` is `j * d + k`,
/// Alice first.
#[derive(Debug, Clone)]
pub struct QuditState {
    dim: usize,
    repr: Repr,
}

impl QuditState {
    /// Pure state from `d^2` amplitudes; the squared norm must be 1 within 1e-12.
    pub fn pure(dim: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_dim(dim)?;
        if amplitudes.len() != dim * dim {
            return Err(Error::InvalidState(format!(
                "expected {} amplitudes, got {}",
                dim * dim,
                amplitudes.len()
            )));
        }
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > PURE_NORM_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm {norm2} is not 1"
            )));
        }
        Ok(Self {
            dim,
            repr: Repr::Pure(DVector::from_vec(amplitudes)),
        })
    }

    /// Pure state from unnormalized amplitudes.
    pub fn pure_normalized(dim: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState(
                "zero or non-finite amplitude vector".into(),
            ));
        }
        Self::pure(dim, amplitudes.into_iter().map(|z| z / norm).collect())
    }

    /// `sum_j c_j |jj>` embedded in `d x d`, normalized.
    pub fn schmidt(dim: usize, coefficients: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if coefficients.len() > dim {
            return Err(Error::InvalidState(format!(
                "{} Schmidt coefficients do not fit dimension {dim}",
                coefficients.len()
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (j, &c) in coefficients.iter().enumerate() {
            amps[j * dim + j] = Complex64::new(c, 0.0);
        }
        Self::pure_normalized(dim, amps)
    }

    /// Mixed state, validated with the default tolerances.
    pub fn mixed(dim: usize, rho: CMatrix) -> Result<Self> {
        Self::mixed_with_tolerance(dim, rho, HERMITIAN_TOL, TRACE_TOL, EIGENVALUE_FLOOR)
    }

    pub fn mixed_with_tolerance(
        dim: usize,
        rho: CMatrix,
        hermitian_tol: f64,
        trace_tol: f64,
        eigenvalue_floor: f64,
    ) -> Result<Self> {
        check_dim(dim)?;
        validate_density(&rho, dim * dim, hermitian_tol, trace_tol, eigenvalue_floor)?;
        Ok(Self {
            dim,
            repr: Repr::Mixed(rho),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<Complex64>> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    /// Amplitudes reshaped as the `d x d` matrix `psi[j][k]`, pure states only.
    pub fn amplitude_matrix(&self) -> Option<CMatrix> {
        let d = self.dim;
        self.amplitudes()
            .map(|v| DMatrix::from_fn(d, d, |j, k| v[j * d + k]))
    }

    /// The density matrix; pure states are converted on demand.
    pub fn density_matrix(&self) -> CMatrix {
        match &self.repr {
            Repr::Pure(v) => v * v.adjoint(),
            Repr::Mixed(rho) => rho.clone(),
        }
    }

    /// Partial trace over the other party.
    pub fn reduced_state(&self, party: Party) -> CMatrix {
        let d = self.dim;
        match &self.repr {
            Repr::Pure(_) => {
                let psi = self.amplitude_matrix().expect("pure");
                match party {
                    Party::A => &psi * psi.adjoint(),
                    Party::B => (psi.adjoint() * &psi).transpose(),
                }
            }
            Repr::Mixed(rho) => {
                let mut out = CMatrix::zeros(d, d);
                for x in 0..d {
                    for y in 0..d {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for t in 0..d {
                            acc += match party {
                                Party::A => rho[(x * d + t, y * d + t)],
                                Party::B => rho[(t * d + x, t * d + y)],
                            };
                        }
                        out[(x, y)] = acc;
                    }
                }
                out
            }
        }
    }

    /// Partial transpose on Bob's side.
    pub fn partial_transpose(&self) -> CMatrix {
        let d = self.dim;
        let rho = self.density_matrix();
        CMatrix::from_fn(d * d, d * d, |r, c| {
            let (j, k) = (r / d, r % d);
            let (jp, kp) = (c / d, c % d);
            rho[(j * d + kp, jp * d + k)]
        })
    }

    /// Smallest eigenvalue of the partial transpose.
    pub fn min_partial_transpose_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.partial_transpose())
    }

    /// Squared Schmidt coefficients in descending order (pure states only).
    pub fn schmidt_weights(&self) -> Option<Vec<f64>> {
        let psi = self.amplitude_matrix()?;
        let mut w: Vec<f64> = psi.singular_values().iter().map(|s| s * s).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        Some(w)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

pub(crate) fn min_eigenvalue(h: &CMatrix) -> f64 {
    h.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Checks shape, Hermiticity, unit trace and positivity.
pub fn validate_density(
    rho: &CMatrix,
    size: usize,
    hermitian_tol: f64,
    trace_tol: f64,
    eigenvalue_floor: f64,
) -> Result<()> {
    if rho.nrows() != size || rho.ncols() != size {
        return Err(Error::InvalidState(format!(
            "density matrix is {}x{}, expected {size}x{size}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidState("non-finite entry".into()));
    }
    let asym = (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if asym > hermitian_tol {
        return Err(Error::InvalidState(format!(
            "not Hermitian (deviation {asym:e})"
        )));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
        return Err(Error::InvalidState(format!("trace {tr} is not 1")));
    }
    // Symmetrize so the eigen-solver sees an exactly Hermitian matrix.
    let herm = (rho + rho.adjoint()).scale(0.5);
    let lo = min_eigenvalue(&herm);
    if lo < eigenvalue_floor {
        return Err(Error::InvalidState(format!("negative eigenvalue {lo:e}")));
    }
    Ok(())
}
