//! Named states: the two-parameter qutrit family, symmetric and asymmetric
//! rank-k states, and two bound entangled qutrit states.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::cglmp::maximal_violation;
use crate::optimize::MultistartOptions;
use crate::quantum::state::{validate_density, EIGENVALUE_FLOOR, HERMITIAN_TOL, TRACE_TOL};
use crate::quantum::{CMatrix, ObservableKind, QuditState};
use crate::{Error, Result};

/// Bound on the most negative partial-transpose eigenvalue of the PPT states.
pub const PPT_TOL: f64 = 1e-10;

/// Frozen M3 angle indices of the three-phase qutrit device: with the six
/// phases numbered from the detector side back to the source, phases 1, 5
/// and 6 are held at zero. Phase `j` is angle index `6 - j`, so phases 2, 3
/// and 4 stay free: one phase of the detector-side layer and the middle layer.
pub const RESTRICTED_M3_FROZEN: [usize; 3] = [0, 1, 5];

/// `cos a |00> + sin a (cos b |11> + sin b |22>)`, angles in degrees.
pub fn schmidt_family_state(alpha_deg: f64, beta_deg: f64) -> Result<QuditState> {
    let (a, b) = (alpha_deg.to_radians(), beta_deg.to_radians());
    QuditState::schmidt(3, &[a.cos(), a.sin() * b.cos(), a.sin() * b.sin()])
}

fn check_rank(d: usize, k: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(2..=d).contains(&k) {
        return Err(Error::InvalidState(format!("rank {k} outside 2..={d}")));
    }
    Ok(())
}

/// `(|00> + ... + |k-1 k-1>) / sqrt(k)` in `d x d`.
pub fn symmetric_rank_k_state(d: usize, k: usize) -> Result<QuditState> {
    check_rank(d, k)?;
    QuditState::schmidt(d, &vec![1.0; k])
}

/// Restarts used for the CGLMP optimization behind the asymmetric states.
pub const ASYMMETRIC_RESTARTS: usize = 8;

/// Schmidt coefficients (decreasing, normalized) of the state that maximally
/// violates the `k`-outcome CGLMP inequality.
pub fn asymmetric_schmidt_coefficients(k: usize, opts: &MultistartOptions) -> Result<Vec<f64>> {
    let mut c = maximal_violation(k, ObservableKind::M1, opts)?.schmidt;
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= norm);
    Ok(c)
}

/// Maximal CGLMP violator for `k` outcomes, embedded in `d x d`.
pub fn asymmetric_rank_k_state(d: usize, k: usize) -> Result<QuditState> {
    check_rank(d, k)?;
    let opts = MultistartOptions::with_restarts(ASYMMETRIC_RESTARTS, 0);
    QuditState::schmidt(d, &asymmetric_schmidt_coefficients(k, &opts)?)
}

fn ket(v: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)))
}

fn product(a: &[f64], b: &[f64]) -> DVector<Complex64> {
    ket(a).kronecker(&ket(b))
}

fn ensure_ppt(state: &QuditState, what: &str) -> Result<()> {
    let min = state.min_partial_transpose_eigenvalue();
    if min < -PPT_TOL {
        return Err(Error::InvalidState(format!(
            "{what} is not PPT (eigenvalue {min:e})"
        )));
    }
    Ok(())
}

/// The five tiles of the 3x3 unextendible product basis.
pub fn tiles_basis() -> [DVector<Complex64>; 5] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        product(&[1.0, 0.0, 0.0], &[s, -s, 0.0]),
        product(&[s, -s, 0.0], &[0.0, 0.0, 1.0]),
        product(&[0.0, 0.0, 1.0], &[0.0, s, -s]),
        product(&[0.0, s, -s], &[1.0, 0.0, 0.0]),
        product(&[1.0 / 3f64.sqrt(); 3], &[1.0 / 3f64.sqrt(); 3]),
    ]
}

/// `(1 - sum_i |psi_i><psi_i|) / 4` over the tiles basis.
pub fn bennett_tiles_state() -> Result<QuditState> {
    let mut rho = CMatrix::identity(9, 9);
    for v in tiles_basis() {
        rho -= &v * v.adjoint();
    }
    let state = QuditState::mixed(3, rho.scale(0.25))?;
    ensure_ppt(&state, "tiles state")?;
    Ok(state)
}

/// One-parameter 3x3 bound entangled family, `0 < a < 1`.
pub fn horodecki_3x3_state(a: f64) -> Result<QuditState> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidState(format!(
            "parameter a = {a} outside (0, 1)"
        )));
    }
    let mut m = nalgebra::DMatrix::<f64>::zeros(9, 9);
    for i in 0..9 {
        m[(i, i)] = a;
    }
    for &(i, j) in &[(0, 4), (0, 8), (4, 8)] {
        m[(i, j)] = a;
        m[(j, i)] = a;
    }
    m[(6, 6)] = (1.0 + a) / 2.0;
    m[(8, 8)] = (1.0 + a) / 2.0;
    let off = (1.0 - a * a).sqrt() / 2.0;
    m[(6, 8)] = off;
    m[(8, 6)] = off;
    let rho = m.map(|x| Complex64::new(x / (8.0 * a + 1.0), 0.0));
    let state = QuditState::mixed(3, rho)?;
    ensure_ppt(&state, "Horodecki state")?;
    Ok(state)
}

/// A catalog entry. `state` is built on demand by [`NamedState::build`].
#[derive(Debug, Clone)]
pub struct NamedState {
    pub name: String,
    pub d: usize,
    pub rank: usize,
    pub description: String,
    pub state: QuditState,
}

impl fmt::Display for NamedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {}, {}",
            self.name, self.d, self.rank, self.description
        )
    }
}

/// Catalog listing without building the states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: String,
    pub d: usize,
    pub rank: usize,
    pub description: String,
}

impl fmt::Display for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {}, {}",
            self.name, self.d, self.rank, self.description
        )
    }
}

/// Names accepted by [`NamedState::build`], for `d` from 2 to `max_d`.
///
/// `sym` and `asym` are the full-rank states; `rank{k}-sym` and
/// `rank{k}-asym` the rank-`k` ones; `product` is `|00>`; `bennett` and
/// `horodecki` (at `a = 0.5`) are the bound entangled qutrit states.
pub fn catalog(max_d: usize) -> Vec<CatalogEntry> {
    let mut out = Vec::new();
    let entry = |name: String, d, rank, description: String| CatalogEntry {
        name,
        d,
        rank,
        description,
    };
    for d in 2..=max_d {
        out.push(entry("product".into(), d, 1, "|00>".into()));
        out.push(entry("sym".into(), d, d, "maximally entangled".into()));
        out.push(entry("asym".into(), d, d, "maximal CGLMP violator".into()));
        for k in 2..d {
            out.push(entry(
                format!("rank{k}-sym"),
                d,
                k,
                format!("maximally entangled on the first {k} levels"),
            ));
            out.push(entry(
                format!("rank{k}-asym"),
                d,
                k,
                format!("{k}-outcome CGLMP violator on the first {k} levels"),
            ));
        }
    }
    out.push(entry(
        "bennett".into(),
        3,
        4,
        "tiles UPB bound entangled state".into(),
    ));
    out.push(entry(
        "horodecki".into(),
        3,
        7,
        "Horodecki bound entangled state, a = 0.5".into(),
    ));
    out
}

impl NamedState {
    pub fn build(name: &str, d: usize) -> Result<Self> {
        let entry = catalog(d.max(3))
            .into_iter()
            .find(|e| e.name == name && e.d == d)
            .ok_or_else(|| Error::InvalidState(format!("no catalog state '{name}' at d={d}")))?;
        let state = match name {
            "product" => QuditState::schmidt(d, &[1.0])?,
            "sym" => symmetric_rank_k_state(d, d)?,
            "asym" => asymmetric_rank_k_state(d, d)?,
            "bennett" => bennett_tiles_state()?,
            "horodecki" => horodecki_3x3_state(0.5)?,
            _ => {
                let (k, kind) = name
                    .strip_prefix("rank")
                    .and_then(|r| r.split_once('-'))
                    .and_then(|(k, kind)| Some((k.parse::<usize>().ok()?, kind)))
                    .ok_or_else(|| Error::InvalidState(format!("bad state name '{name}'")))?;
                match kind {
                    "sym" => symmetric_rank_k_state(d, k)?,
                    "asym" => asymmetric_rank_k_state(d, k)?,
                    _ => return Err(Error::InvalidState(format!("bad state name '{name}'"))),
                }
            }
        };
        Ok(Self {
            name: entry.name,
            d,
            rank: entry.rank,
            description: entry.description,
            state,
        })
    }
}

/// Rechecks a catalog state's density matrix against the state invariants.
pub fn validate_named(state: &NamedState) -> Result<()> {
    validate_density(
        &state.state.density_matrix(),
        state.d * state.d,
        HERMITIAN_TOL,
        TRACE_TOL,
        EIGENVALUE_FLOOR,
    )
}

/// Number of density-matrix eigenvalues above `tol`.
pub fn numerical_rank(state: &QuditState, tol: f64) -> usize {
    nalgebra::SymmetricEigen::new(state.density_matrix())
        .eigenvalues
        .iter()
        .filter(|&&e| e > tol)
        .count()
}
