// Negated comparisons below are deliberate: they treat NaN as worst.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rayon::prelude::*;
use serde::Serialize;

use super::multistart::{minimize_visibility, MultistartOptions};
use super::objective::ObjectiveSpec;
use crate::lp::VisibilityStatus;
use crate::quantum::{NoiseModel, ObservableKind, QuditState};
use crate::{Error, Result};

/// Everything about a scan point except the state.
#[derive(Debug, Clone)]
pub struct ScanTemplate {
    pub noise: NoiseModel,
    pub kind: ObservableKind,
    pub m: usize,
    pub frozen: Vec<usize>,
}

impl ScanTemplate {
    pub fn new(noise: NoiseModel, kind: ObservableKind, m: usize) -> Self {
        Self {
            noise,
            kind,
            m,
            frozen: Vec::new(),
        }
    }

    pub fn spec(&self, state: QuditState) -> Result<ObjectiveSpec> {
        ObjectiveSpec::new(state, self.noise.clone(), self.kind, self.m)?.with_frozen(&self.frozen)
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub multistart: MultistartOptions,
    /// Start each point's restart 0 from the best settings of the nearest
    /// already finished point.
    pub warm_start: bool,
    /// With warm starts, sweep the points a second time in reverse order and
    /// keep whichever pass did better at each point.
    pub reverse_pass: bool,
    /// Continuation rounds after the sweeps. Each round revisits every point
    /// and descends from the settings of grid neighbors that did better,
    /// keeping improvements. Rounds stop early once nothing improves.
    pub neighbor_passes: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            multistart: MultistartOptions::default(),
            warm_start: true,
            reverse_pass: false,
            neighbor_passes: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    pub alpha_deg: f64,
    pub beta_deg: f64,
    /// NaN when the point failed.
    pub v_crit: f64,
    pub status: Option<VisibilityStatus>,
    pub restarts: usize,
    pub seed: u64,
    pub error: Option<String>,
    #[serde(skip)]
    pub parameters: Vec<f64>,
}

impl ScanRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.v_crit.is_finite()
    }
}

/// Inclusive range `start, start + step, ...` up to `end` (within 1e-9).
pub fn degree_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
        return Err(Error::Scenario(format!(
            "bad range {start}..{end} step {step}"
        )));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Row-major `(alpha, beta)` grid, alpha outer.
pub fn grid(alphas: &[f64], betas: &[f64]) -> Vec<(f64, f64)> {
    alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .collect()
}

/// Boundaries of the region where `candidate` beats `reference` by more than
/// `margin`, each placed midway between the two grid points that straddle it.
/// Points where either value is NaN count as not better.
pub fn crossings(
    alphas: &[f64],
    reference: &[f64],
    candidate: &[f64],
    margin: f64,
) -> Result<Vec<f64>> {
    if alphas.len() != reference.len() || alphas.len() != candidate.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} angles, {} reference values, {} candidate values",
            alphas.len(),
            reference.len(),
            candidate.len()
        )));
    }
    let better: Vec<bool> = reference
        .iter()
        .zip(candidate)
        .map(|(r, c)| c < &(r - margin))
        .collect();
    Ok((1..alphas.len())
        .filter(|&i| better[i] != better[i - 1])
        .map(|i| 0.5 * (alphas[i - 1] + alphas[i]))
        .collect())
}

fn optimize_point(
    family: &(dyn Fn(f64, f64) -> Result<QuditState> + Sync),
    template: &ScanTemplate,
    point: (f64, f64),
    opts: &MultistartOptions,
) -> ScanRecord {
    let outcome = family(point.0, point.1)
        .and_then(|s| template.spec(s))
        .and_then(|spec| minimize_visibility(&spec, opts));
    let mut rec = ScanRecord {
        alpha_deg: point.0,
        beta_deg: point.1,
        v_crit: f64::NAN,
        status: None,
        restarts: opts.restarts,
        seed: opts.seed,
        error: None,
        parameters: Vec::new(),
    };
    match outcome {
        Ok(r) => {
            rec.v_crit = r.v_crit;
            rec.status = Some(r.status);
            rec.parameters = r.parameters;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Runs the points in the given order, starting restart 0 of each from the
/// best settings of the nearest finished point.
fn warm_sweep(
    family: &(dyn Fn(f64, f64) -> Result<QuditState> + Sync),
    template: &ScanTemplate,
    points: impl Iterator<Item = (f64, f64)>,
    opts: &MultistartOptions,
) -> Vec<ScanRecord> {
    let mut done: Vec<ScanRecord> = Vec::new();
    for p in points {
        let mut ms = opts.clone();
        let nearest = done
            .iter()
            .filter(|r| r.is_ok() && !r.parameters.is_empty())
            .min_by(|a, b| {
                let da = (a.alpha_deg - p.0).powi(2) + (a.beta_deg - p.1).powi(2);
                let db = (b.alpha_deg - p.0).powi(2) + (b.beta_deg - p.1).powi(2);
                da.total_cmp(&db)
            });
        if let Some(n) = nearest {
            ms.initial_points.insert(0, n.parameters.clone());
        }
        done.push(optimize_point(family, template, p, &ms));
    }
    done
}

/// Indices of the points within 1.5 grid spacings of each point, where the
/// spacing is the smallest distance between two distinct points.
fn neighbors(points: &[(f64, f64)]) -> Vec<Vec<usize>> {
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let mut spacing = f64::INFINITY;
    for (i, &p) in points.iter().enumerate() {
        for &q in &points[i + 1..] {
            let d = dist(p, q);
            if d > 1e-12 {
                spacing = spacing.min(d);
            }
        }
    }
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            (0..points.len())
                .filter(|&j| j != i && dist(p, points[j]) <= 1.5 * spacing)
                .collect()
        })
        .collect()
}

/// Improves `records` in place by descending from better neighbors' settings.
fn propagate(
    family: &(dyn Fn(f64, f64) -> Result<QuditState> + Sync),
    template: &ScanTemplate,
    points: &[(f64, f64)],
    records: &mut [ScanRecord],
    opts: &MultistartOptions,
    rounds: usize,
) {
    let adjacent = neighbors(points);
    for _ in 0..rounds {
        let mut improved = false;
        for (i, &p) in points.iter().enumerate() {
            let starts: Vec<Vec<f64>> = adjacent[i]
                .iter()
                .map(|&j| &records[j])
                .filter(|r| {
                    r.is_ok() && !r.parameters.is_empty() && !(r.v_crit >= records[i].v_crit)
                })
                .map(|r| r.parameters.clone())
                .collect();
            if starts.is_empty() {
                continue;
            }
            let ms = MultistartOptions {
                restarts: starts.len(),
                initial_points: starts,
                ..opts.clone()
            };
            let rec = optimize_point(family, template, p, &ms);
            if rec.is_ok() && !(rec.v_crit >= records[i].v_crit - 1e-9) {
                records[i] = ScanRecord {
                    restarts: records[i].restarts,
                    ..rec
                };
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Minimizes the critical visibility of `family(alpha, beta)` at each grid
/// point. Records come back in grid order. Failures are recorded per point.
///
/// With warm starts the points run one after another (each depends on its
/// predecessors); otherwise they run in parallel.
pub fn scan_family(
    family: &(dyn Fn(f64, f64) -> Result<QuditState> + Sync),
    points: &[(f64, f64)],
    template: &ScanTemplate,
    opts: &ScanOptions,
) -> Result<Vec<ScanRecord>> {
    if points.is_empty() {
        return Err(Error::Scenario("empty grid".into()));
    }
    // Points run inside the pool built below.
    let inner = MultistartOptions {
        threads: None,
        ..opts.multistart.clone()
    };
    let sweep = || -> Vec<ScanRecord> {
        if !opts.warm_start {
            return points
                .par_iter()
                .map(|&p| optimize_point(family, template, p, &inner))
                .collect();
        }
        let forward = warm_sweep(family, template, points.iter().copied(), &inner);
        if !opts.reverse_pass {
            return forward;
        }
        let backward = warm_sweep(family, template, points.iter().rev().copied(), &inner);
        forward
            .into_iter()
            .zip(backward.into_iter().rev())
            .map(|(f, b)| {
                if b.is_ok() && !(f.v_crit <= b.v_crit) {
                    b
                } else {
                    f
                }
            })
            .collect()
    };
    let run = || {
        let mut records = sweep();
        if opts.neighbor_passes > 0 {
            propagate(
                family,
                template,
                points,
                &mut records,
                &inner,
                opts.neighbor_passes,
            );
        }
        records
    };
    match opts.multistart.threads {
        Some(t) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Optimization(e.to_string()))?
            .install(run)),
        None => Ok(run()),
    }
}
