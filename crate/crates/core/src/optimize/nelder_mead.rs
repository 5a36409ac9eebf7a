use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Offset of the initial simplex vertices along each coordinate.
    pub initial_step: f64,
    /// Stop when `max f - min f` over the simplex falls below this.
    pub f_tol: f64,
    /// Stop when the largest vertex distance from the best vertex falls below this.
    pub x_tol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.25,
            f_tol: 1e-7,
            x_tol: 1e-7,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// False when the iteration cap was hit.
    pub converged: bool,
}

/// Minimizes `f` from `x0`. A non-finite objective value aborts with
/// [`Error::NonFinite`] carrying the offending point.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> Result<f64> {
        evaluations += 1;
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                point: x.to_vec(),
                value: v,
            })
        }
    };
    if n == 0 {
        let value = eval(x0)?;
        return Ok(NelderMeadResult {
            x: Vec::new(),
            value,
            iterations: 0,
            evaluations: 1,
            converged: true,
        });
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values = Vec::with_capacity(n + 1);
    for v in &simplex {
        values.push(eval(v)?);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        let spread = values[worst] - values[best];
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread < opts.f_tol || diameter < opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &idx in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        let along = |coef: f64, out: &mut Vec<f64>, worst_pt: &[f64]| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(worst_pt) {
                *o = c + coef * (c - w);
            }
        };

        along(opts.reflection, &mut trial, &simplex[worst]);
        let fr = eval(&trial)?;
        if fr < values[best] {
            along(
                opts.reflection * opts.expansion,
                &mut trial2,
                &simplex[worst],
            );
            let fe = eval(&trial2)?;
            if fe < fr {
                simplex[worst].clone_from(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].clone_from(&trial);
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst].clone_from(&trial);
            values[worst] = fr;
            continue;
        }
        // Contraction: outside when the reflection improved on the worst point.
        let (coef, bound) = if fr < values[worst] {
            (opts.reflection * opts.contraction, fr)
        } else {
            (-opts.contraction, values[worst])
        };
        along(coef, &mut trial2, &simplex[worst]);
        let fc = eval(&trial2)?;
        if fc < bound {
            simplex[worst].clone_from(&trial2);
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            for (x, a) in simplex[idx].iter_mut().zip(&anchor) {
                *x = a + opts.shrink * (*x - a);
            }
            values[idx] = eval(&simplex[idx])?;
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    Ok(NelderMeadResult {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    })
}
