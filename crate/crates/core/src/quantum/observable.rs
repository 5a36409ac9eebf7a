use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CMatrix;
use crate::{Error, Result};

/// Measurement-device class.
///
/// `M1`, `M2`, `M3` are one, two or three unbiased multiports (Fourier
/// matrices), each preceded by a layer of phase shifters. `FullUnitary` covers
/// all of U(d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservableKind {
    M1,
    M2,
    M3,
    FullUnitary,
}

impl ObservableKind {
    pub const ALL: [ObservableKind; 4] = [Self::M1, Self::M2, Self::M3, Self::FullUnitary];

    /// Number of multiport layers, `None` for the full unitary group.
    pub fn layers(self) -> Option<usize> {
        match self {
            Self::M1 => Some(1),
            Self::M2 => Some(2),
            Self::M3 => Some(3),
            Self::FullUnitary => None,
        }
    }

    pub fn angle_count(self, dim: usize) -> usize {
        match self.layers() {
            Some(l) => l * (dim - 1),
            None => dim * dim,
        }
    }

    /// Angle indices that never change measurement statistics. For the full
    /// unitary these are the trailing input-side phases, which commute
    /// through the rotations and end up as unobservable output phases.
    pub fn gauge_indices(self, dim: usize) -> Vec<usize> {
        match self {
            Self::FullUnitary => (dim * (dim - 1)..dim * dim).collect(),
            _ => Vec::new(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::M1 => "m1",
            Self::M2 => "m2",
            Self::M3 => "m3",
            Self::FullUnitary => "u",
        }
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Self::M1),
            "m2" => Ok(Self::M2),
            "m3" => Ok(Self::M3),
            "u" | "full" | "unitary" | "fullunitary" => Ok(Self::FullUnitary),
            other => Err(Error::Parametrization(format!(
                "unknown observable kind '{other}'"
            ))),
        }
    }
}

/// A parametrized local measurement: the unitary applied before detection in
/// the computational basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub dim: usize,
    pub angles: Vec<f64>,
}

/// Unchecked wire form; deserialization goes through [`ObservableSpec::new`].
#[derive(Deserialize)]
struct RawSpec {
    kind: ObservableKind,
    dim: usize,
    angles: Vec<f64>,
}

impl TryFrom<RawSpec> for ObservableSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        Self::new(raw.kind, raw.dim, raw.angles)
    }
}

impl ObservableSpec {
    pub fn new(kind: ObservableKind, dim: usize, angles: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let want = kind.angle_count(dim);
        if angles.len() != want {
            return Err(Error::Parametrization(format!(
                "{kind} at d={dim} takes {want} angles, got {}",
                angles.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Parametrization("non-finite angle".into()));
        }
        Ok(Self { kind, dim, angles })
    }

    pub fn zeros(kind: ObservableKind, dim: usize) -> Result<Self> {
        Self::new(kind, dim, vec![0.0; kind.angle_count(dim.max(2))])
    }

    /// Full-unitary spec reproducing `u` exactly.
    pub fn from_unitary(u: &CMatrix) -> Result<Self> {
        Self::new(ObservableKind::FullUnitary, u.nrows(), givens_decompose(u)?)
    }

    pub fn compile(&self) -> CMatrix {
        compile_angles(self.kind, self.dim, &self.angles)
    }
}

/// Compiles `(kind, angles)` without re-validating; callers guarantee the length.
pub(crate) fn compile_angles(kind: ObservableKind, dim: usize, angles: &[f64]) -> CMatrix {
    match kind.layers() {
        Some(layers) => {
            let f = fourier_unchecked(dim);
            let mut u = CMatrix::identity(dim, dim);
            for layer in angles.chunks(dim - 1).take(layers) {
                // u <- F D(phi) u, input side first.
                for row in 1..dim {
                    let ph = Complex64::from_polar(1.0, layer[row - 1]);
                    for col in 0..dim {
                        u[(row, col)] *= ph;
                    }
                }
                u = &f * u;
            }
            u
        }
        None => givens_compose(dim, angles),
    }
}

/// `U_kl = d^(-1/2) exp(2 pi i k l / d)`.
pub fn fourier_matrix(dim: usize) -> Result<CMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    Ok(fourier_unchecked(dim))
}

fn fourier_unchecked(dim: usize) -> CMatrix {
    let norm = 1.0 / (dim as f64).sqrt();
    CMatrix::from_fn(dim, dim, |k, l| {
        Complex64::from_polar(norm, 2.0 * PI * ((k * l) % dim) as f64 / dim as f64)
    })
}

/// Mode pairs `(p, p + 1)` of the rotation sequence, in product order.
pub fn rotation_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(dim * (dim - 1) / 2);
    for col in 0..dim.saturating_sub(1) {
        for r in (col..dim - 1).rev() {
            pairs.push((r, r + 1));
        }
    }
    pairs
}

/// Left-multiplies rows `(p, q)` of `u` by `[[c, -e^{-i phi} s], [e^{i phi} s, c]]`.
fn rotate_rows(u: &mut CMatrix, p: usize, q: usize, theta: f64, phi: f64) {
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    let ec = e.conj();
    for col in 0..u.ncols() {
        let x = u[(p, col)];
        let y = u[(q, col)];
        u[(p, col)] = x * c - ec * y * s;
        u[(q, col)] = e * x * s + y * c;
    }
}

/// `U = G_1 G_2 ... G_N diag(e^{i delta})` with angle layout
/// `[theta_1, phi_1, ..., theta_N, phi_N, delta_0, ..., delta_{d-1}]`.
fn givens_compose(dim: usize, angles: &[f64]) -> CMatrix {
    let pairs = rotation_pairs(dim);
    let n_rot = pairs.len();
    let mut u = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        u[(j, j)] = Complex64::from_polar(1.0, angles[2 * n_rot + j]);
    }
    for (n, &(p, q)) in pairs.iter().enumerate().rev() {
        rotate_rows(&mut u, p, q, angles[2 * n], angles[2 * n + 1]);
    }
    u
}

/// Inverse of the full-unitary parametrization: angles whose compiled matrix
/// equals `u` (to roundoff). Fails if `u` is not unitary within 1e-10.
pub fn givens_decompose(u: &CMatrix) -> Result<Vec<f64>> {
    let dim = u.nrows();
    if dim < 2 || u.ncols() != dim {
        return Err(Error::InvalidDimension(dim));
    }
    let dev = unitarity_deviation(u);
    if dev > 1e-10 {
        return Err(Error::Parametrization(format!(
            "matrix not unitary (deviation {dev:e})"
        )));
    }
    let pairs = rotation_pairs(dim);
    let mut w = u.clone();
    let mut angles = vec![0.0; dim * dim];
    // Null the strict lower triangle column by column with row rotations
    // T_n; then U = T_1^dag ... T_N^dag D and T^dag(theta, phi) = R(-theta, phi).
    for (n, &(p, q)) in pairs.iter().enumerate() {
        let col = pairs_column(dim, n);
        let x = w[(p, col)];
        let y = w[(q, col)];
        let theta = y.norm().atan2(x.norm());
        let phi = y.arg() - x.arg() + PI;
        rotate_rows(&mut w, p, q, theta, phi);
        angles[2 * n] = -theta;
        angles[2 * n + 1] = phi;
    }
    let n_rot = pairs.len();
    for j in 0..dim {
        angles[2 * n_rot + j] = w[(j, j)].arg();
    }
    Ok(angles)
}

fn pairs_column(dim: usize, mut n: usize) -> usize {
    let mut col = 0;
    while n >= dim - 1 - col {
        n -= dim - 1 - col;
        col += 1;
    }
    col
}

/// `max |(U U^dag - 1)_ij|`.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let prod = u * u.adjoint();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// The outcome relabeling `k -> -k mod d`, which equals `F F`.
pub fn negation_permutation(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |r, c| {
        if r == (dim - c) % dim {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}
