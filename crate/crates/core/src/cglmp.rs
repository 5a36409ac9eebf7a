//! The CGLMP inequality for two settings and `d` outcomes per party.
//!
//! ```text
//! I_d = sum_{k < d/2} (1 - 2k/(d-1)) [ P(A1 = B1 + k) + P(B1 = A2 + k + 1)
//!                                    + P(A2 = B2 + k) + P(B2 = A1 + k)
//!                                    - P(A1 = B1 - k - 1) - P(B1 = A2 - k)
//!                                    - P(A2 = B2 - k - 1) - P(B2 = A1 - k - 1) ]
//! ```
//!
//! with `P(A_i = B_k + c) = sum_b P(a = b + c mod d, b | i, k)`. Local
//! realistic models obey `I_d <= 2`.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::optimize::{nelder_mead, random_start, MultistartOptions};
use crate::quantum::observable::compile_angles;
use crate::quantum::{
    probability_table, CMatrix, ObservableKind, ObservableSpec, ProbabilityTable, QuditState,
};
use crate::{Error, Result};

pub const CLASSICAL_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CglmpEvaluation {
    pub d: usize,
    pub value: f64,
    pub classical_bound: f64,
    /// Visibility below which white noise hides the violation: `2 / I_d`
    /// when `I_d > 2`, otherwise 1.
    pub implied_visibility: f64,
}

/// Coefficients `c` with `I_d = sum c[(i, k, a, b)] P(a, b | i, k)`, in
/// [`ProbabilityTable`] order for `m = 2`.
pub fn cglmp_coefficients(d: usize) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let mut c = vec![0.0; 4 * d * d];
    let dd = d as i64;
    // Adds `w P(A_i = B_k + shift)`.
    let mut add = |i: usize, k: usize, shift: i64, w: f64| {
        for b in 0..d {
            let a = (b as i64 + shift).rem_euclid(dd) as usize;
            c[((i * 2 + k) * d + a) * d + b] += w;
        }
    };
    for k in 0..d / 2 {
        let w = 1.0 - 2.0 * k as f64 / (d as f64 - 1.0);
        let k = k as i64;
        add(0, 0, k, w);
        add(1, 0, -(k + 1), w);
        add(1, 1, k, w);
        add(0, 1, -k, w);
        add(0, 0, -k - 1, -w);
        add(1, 0, k, -w);
        add(1, 1, -k - 1, -w);
        add(0, 1, k + 1, -w);
    }
    Ok(c)
}

fn evaluation(d: usize, value: f64) -> CglmpEvaluation {
    CglmpEvaluation {
        d,
        value,
        classical_bound: CLASSICAL_BOUND,
        implied_visibility: if value > CLASSICAL_BOUND {
            CLASSICAL_BOUND / value
        } else {
            1.0
        },
    }
}

pub fn cglmp_value(table: &ProbabilityTable) -> Result<CglmpEvaluation> {
    if table.settings() != 2 {
        return Err(Error::Unsupported(format!(
            "CGLMP needs two settings per party, table has {}",
            table.settings()
        )));
    }
    let d = table.outcomes();
    let c = cglmp_coefficients(d)?;
    let value = c.iter().zip(table.as_slice()).map(|(x, p)| x * p).sum();
    Ok(evaluation(d, value))
}

/// Visibility at which `v S + (1 - v) N` reaches the classical bound, using
/// the explicit noise value rather than assuming it vanishes.
pub fn implied_visibility(signal: &ProbabilityTable, noise: &ProbabilityTable) -> Result<f64> {
    let s = cglmp_value(signal)?.value;
    let n = cglmp_value(noise)?.value;
    if n > CLASSICAL_BOUND {
        return Err(Error::InvalidNoise(format!(
            "noise itself violates CGLMP (I = {n})"
        )));
    }
    Ok(if s > CLASSICAL_BOUND {
        (CLASSICAL_BOUND - n) / (s - n)
    } else {
        1.0
    })
}

/// Bell operator `sum c P_a (x) P_b` for the given measurement unitaries,
/// on the `d^2` space with basis index `j d + k`.
pub fn bell_operator(alice: &[CMatrix; 2], bob: &[CMatrix; 2]) -> Result<CMatrix> {
    let d = alice[0].nrows();
    let c = cglmp_coefficients(d)?;
    let projector =
        |u: &CMatrix, a: usize| CMatrix::from_fn(d, d, |j, l| u[(a, j)].conj() * u[(a, l)]);
    let pa: Vec<Vec<CMatrix>> = alice
        .iter()
        .map(|u| (0..d).map(|a| projector(u, a)).collect())
        .collect();
    let pb: Vec<Vec<CMatrix>> = bob
        .iter()
        .map(|u| (0..d).map(|b| projector(u, b)).collect())
        .collect();
    let mut op = CMatrix::zeros(d * d, d * d);
    for i in 0..2 {
        for k in 0..2 {
            for a in 0..d {
                for b in 0..d {
                    let w = c[((i * 2 + k) * d + a) * d + b];
                    if w != 0.0 {
                        op += pa[i][a].kronecker(&pb[k][b]).scale(w);
                    }
                }
            }
        }
    }
    Ok(op)
}

/// Largest CGLMP value over all states for the best settings found, with the
/// state attaining it.
#[derive(Debug, Clone)]
pub struct MaximalViolation {
    pub value: f64,
    /// Schmidt coefficients of the optimal state, sorted in decreasing order.
    pub schmidt: Vec<f64>,
    pub alice: [CMatrix; 2],
    pub bob: [CMatrix; 2],
}

/// Maximizes the top eigenvalue of the Bell operator over `kind` settings.
pub fn maximal_violation(
    d: usize,
    kind: ObservableKind,
    opts: &MultistartOptions,
) -> Result<MaximalViolation> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let per = kind.angle_count(d);
    let unitaries = |x: &[f64]| -> ([CMatrix; 2], [CMatrix; 2]) {
        let u = |o: usize| compile_angles(kind, d, &x[o * per..(o + 1) * per]);
        ([u(0), u(1)], [u(2), u(3)])
    };
    let top = |x: &[f64]| -> Result<f64> {
        let (a, b) = unitaries(x);
        let op = bell_operator(&a, &b)?;
        Ok(SymmetricEigen::new(op).eigenvalues.max())
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in 0..opts.restarts.max(1) {
        let x0 = opts
            .initial_points
            .get(r)
            .cloned()
            .unwrap_or_else(|| random_start(opts.seed, r, 4 * per));
        let res = nelder_mead(|x| top(x).map(|v| -v), &x0, &opts.nelder_mead)?;
        if best.as_ref().is_none_or(|(v, _)| -res.value > *v) {
            best = Some((-res.value, res.x));
        }
    }
    let (value, x) = best.expect("at least one restart");
    let (alice, bob) = unitaries(&x);
    let eig = SymmetricEigen::new(bell_operator(&alice, &bob)?);
    let idx = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(idx);
    let psi = CMatrix::from_fn(d, d, |j, k| v[j * d + k]);
    let mut schmidt: Vec<f64> = psi
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    schmidt.sort_by(|a, b| b.total_cmp(a));
    Ok(MaximalViolation {
        value,
        schmidt,
        alice,
        bob,
    })
}

/// Best CGLMP violation of one state over `kind` settings.
///
/// The value is maximized over the settings and over the two labelings of
/// Bob's outcomes, `b` and `-b mod d`. Relabeling does not change whether a
/// local model exists, so both give valid bounds on the critical visibility.
#[derive(Debug, Clone)]
pub struct CglmpOptimum {
    pub evaluation: CglmpEvaluation,
    pub alice: Vec<ObservableSpec>,
    pub bob: Vec<ObservableSpec>,
}

pub fn optimize_cglmp(
    state: &QuditState,
    kind: ObservableKind,
    opts: &MultistartOptions,
) -> Result<CglmpOptimum> {
    let d = state.dim();
    let per = kind.angle_count(d);
    let specs = |x: &[f64]| -> Result<(Vec<ObservableSpec>, Vec<ObservableSpec>)> {
        let mut all = (0..4)
            .map(|o| ObservableSpec::new(kind, d, x[o * per..(o + 1) * per].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let bob = all.split_off(2);
        Ok((all, bob))
    };
    // Bob's outcomes relabeled b -> -b, which turns sum correlations into the
    // difference correlations the inequality scores.
    let negate: Vec<Vec<usize>> = vec![(0..d).map(|b| (d - b) % d).collect(); 2];
    let identity: Vec<Vec<usize>> = vec![(0..d).collect(); 2];
    let value = |x: &[f64]| -> Result<f64> {
        let (a, b) = specs(x)?;
        let table = probability_table(state, &a, &b)?;
        let plain = cglmp_value(&table)?.value;
        let negated = cglmp_value(&table.relabeled(&identity, &negate))?.value;
        Ok(plain.max(negated))
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in 0..opts.restarts.max(1) {
        let x0 = opts
            .initial_points
            .get(r)
            .cloned()
            .unwrap_or_else(|| random_start(opts.seed, r, 4 * per));
        let res = nelder_mead(|x| value(x).map(|v| -v), &x0, &opts.nelder_mead)?;
        if best.as_ref().is_none_or(|(v, _)| -res.value > *v) {
            best = Some((-res.value, res.x));
        }
    }
    let (v, x) = best.expect("at least one restart");
    let (alice, bob) = specs(&x)?;
    Ok(CglmpOptimum {
        evaluation: evaluation(d, v),
        alice,
        bob,
    })
}

/// Optimized CGLMP-implied visibility along a one-parameter family of states.
pub fn cglmp_visibility_curve(
    states: &[(f64, QuditState)],
    kind: ObservableKind,
    opts: &MultistartOptions,
) -> Result<Vec<(f64, f64)>> {
    states
        .iter()
        .map(|(t, s)| {
            Ok((
                *t,
                optimize_cglmp(s, kind, opts)?.evaluation.implied_visibility,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{atom_assignment, atom_count, deterministic_atom_table};

    #[test]
    fn local_bound_is_two_over_all_deterministic_strategies() {
        for d in 2..=5 {
            let mut best = f64::NEG_INFINITY;
            for j in 0..atom_count(2, d) {
                let t = deterministic_atom_table(&atom_assignment(j, 2, d), 2, d).unwrap();
                best = best.max(cglmp_value(&t).unwrap().value);
            }
            assert!((best - 2.0).abs() < 1e-12, "d={d}: {best}");
        }
    }

    #[test]
    fn uniform_table_scores_zero() {
        for d in 2..=5 {
            let e = cglmp_value(&ProbabilityTable::uniform(2, d).unwrap()).unwrap();
            assert!(e.value.abs() < 1e-12);
            assert_eq!(e.implied_visibility, 1.0);
        }
    }

    #[test]
    fn rejects_other_setting_counts() {
        let t = ProbabilityTable::uniform(3, 3).unwrap();
        assert!(matches!(cglmp_value(&t), Err(Error::Unsupported(_))));
    }

    #[test]
    fn maximal_violation_d2_is_tsirelson_and_d3_is_asymmetric() {
        let opts = MultistartOptions::with_restarts(6, 1);
        let q = maximal_violation(2, ObservableKind::M1, &opts).unwrap();
        assert!((q.value - 2.0 * 2f64.sqrt()).abs() < 1e-6, "{}", q.value);
        assert!((q.schmidt[0] - q.schmidt[1]).abs() < 1e-4);
        let q = maximal_violation(3, ObservableKind::M1, &opts).unwrap();
        // (1 + sqrt(11/3)) is the known optimum for qutrits.
        assert!(
            (q.value - (1.0 + (11.0f64 / 3.0).sqrt())).abs() < 1e-6,
            "{}",
            q.value
        );
        let gamma = q.schmidt[2] / q.schmidt[0];
        assert!(
            (gamma - (11f64.sqrt() - 3f64.sqrt()) / 2.0).abs() < 1e-4,
            "{gamma}"
        );
        assert!((q.schmidt[0] - q.schmidt[1]).abs() < 1e-4);
    }

    #[test]
    fn operator_expectation_matches_table() {
        let s = QuditState::schmidt(3, &[1.0, 0.8, 0.5]).unwrap();
        let specs: Vec<ObservableSpec> = [0.3, 1.2, -0.7, 2.2]
            .iter()
            .map(|&t| ObservableSpec::new(ObservableKind::M1, 3, vec![t, 2.0 * t]).unwrap())
            .collect();
        let u: Vec<CMatrix> = specs.iter().map(ObservableSpec::compile).collect();
        let op =
            bell_operator(&[u[0].clone(), u[1].clone()], &[u[2].clone(), u[3].clone()]).unwrap();
        let psi = s.amplitudes().unwrap();
        let expect = (psi.adjoint() * &op * psi)[(0, 0)].re;
        let table = probability_table(&s, &specs[..2], &specs[2..]).unwrap();
        assert!((expect - cglmp_value(&table).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn maximally_entangled_qutrit_under_m1() {
        let s = QuditState::schmidt(3, &[1.0; 3]).unwrap();
        let best = optimize_cglmp(
            &s,
            ObservableKind::M1,
            &MultistartOptions::with_restarts(6, 2),
        )
        .unwrap();
        // Closed form for the maximally entangled pair: 4 / (6 sqrt 3 - 9).
        let exact = 4.0 / (6.0 * 3f64.sqrt() - 9.0);
        assert!(
            (best.evaluation.value - exact).abs() < 1e-6,
            "{}",
            best.evaluation.value
        );
        assert!((best.evaluation.implied_visibility - 2.0 / exact).abs() < 1e-6);
    }
}
