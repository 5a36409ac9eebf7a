use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::objective::ObjectiveSpec;
use crate::lp::VisibilityStatus;
use crate::quantum::{ObservableKind, ObservableSpec};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MultistartOptions {
    pub restarts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
    /// After a run converges, restart the simplex at its best vertex up to
    /// this many times while the value keeps dropping.
    pub polish_rounds: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Basin-hopping rounds after the first descent: perturb the best point
    /// by `kick_scale` radians per coordinate (uniform) and descend again,
    /// keeping the result only if it improves.
    pub kicks: usize,
    pub kick_scale: f64,
    /// Reuse the LP basis between consecutive objective evaluations.
    pub warm_start_lp: bool,
    /// Starting points for the first restarts, in place of random ones.
    pub initial_points: Vec<Vec<f64>>,
}

impl Default for MultistartOptions {
    fn default() -> Self {
        Self {
            restarts: 30,
            seed: 0,
            nelder_mead: NelderMeadOptions::default(),
            polish_rounds: 3,
            kicks: 0,
            kick_scale: 0.5,
            threads: None,
            warm_start_lp: true,
            initial_points: Vec::new(),
        }
    }
}

impl MultistartOptions {
    pub fn with_restarts(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            seed,
            ..Default::default()
        }
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, Serialize)]
pub struct RestartRecord {
    pub restart: usize,
    /// Best objective value (extended visibility); NaN when the restart failed.
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub penalties: usize,
    pub error: Option<String>,
    #[serde(skip)]
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    /// Critical visibility at the best settings, recomputed with the general LP.
    pub v_crit: f64,
    pub status: VisibilityStatus,
    /// Objective value at the best settings (may exceed 1 for local signals).
    pub extended_visibility: f64,
    pub parameters: Vec<f64>,
    pub alice: Vec<ObservableSpec>,
    pub bob: Vec<ObservableSpec>,
    pub best_restart: usize,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<RestartRecord>,
    pub seed: u64,
}

impl OptimizationResult {
    pub fn restarts(&self) -> usize {
        self.history.len()
    }

    pub fn evaluations(&self) -> usize {
        self.history.iter().map(|r| r.evaluations).sum()
    }
}

/// Random start of restart `r`: uniform in `[0, 2 pi)^n`, drawn from a stream
/// of its own so results do not depend on the number of restarts or threads.
pub fn random_start(seed: u64, restart: usize, n: usize) -> Vec<f64> {
    let mut rng = restart_rng(seed, restart);
    (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Nelder-Mead restarted at its own best vertex while that keeps helping.
fn descend<F>(
    f: &mut F,
    x0: Vec<f64>,
    opts: &MultistartOptions,
    record: &mut RestartRecord,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut x = x0;
    let mut best = f64::INFINITY;
    for round in 0..=opts.polish_rounds {
        let r = nelder_mead(&mut *f, &x, &opts.nelder_mead)?;
        record.iterations += r.iterations;
        record.converged = r.converged;
        let improved = best - r.value;
        if r.value < best {
            best = r.value;
            x = r.x;
        }
        if round > 0 && improved <= 1e-9 {
            break;
        }
    }
    Ok((x, best))
}

fn run_restart(spec: &ObjectiveSpec, opts: &MultistartOptions, restart: usize) -> RestartRecord {
    let n = spec.parameter_count();
    let mut record = RestartRecord {
        restart,
        value: f64::NAN,
        iterations: 0,
        evaluations: 0,
        converged: false,
        penalties: 0,
        error: None,
        x: Vec::new(),
    };
    let mut rng = restart_rng(opts.seed, restart);
    let random: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    let x0 = opts.initial_points.get(restart).cloned().unwrap_or(random);
    if x0.len() != n {
        record.error = Some(format!(
            "initial point has {} coordinates, expected {n}",
            x0.len()
        ));
        return record;
    }
    let mut obj = spec.objective(opts.warm_start_lp);
    let mut f = |p: &[f64]| obj.value(p);
    let search = || -> Result<(Vec<f64>, f64)> {
        let (mut x, mut best) = descend(&mut f, x0, opts, &mut record)?;
        for _ in 0..opts.kicks {
            let start: Vec<f64> = x
                .iter()
                .map(|v| v + rng.random_range(-opts.kick_scale..opts.kick_scale))
                .collect();
            let (y, val) = descend(&mut f, start, opts, &mut record)?;
            if val < best {
                best = val;
                x = y;
            }
        }
        Ok((x, best))
    };
    let outcome = search();
    match outcome {
        Ok((x, best)) => {
            record.value = best;
            record.x = x;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.evaluations = obj.evaluations;
    record.penalties = obj.penalties;
    record
}

/// Multistart Nelder-Mead minimization of the critical visibility.
///
/// The result is an upper bound on the true minimum over the parametrization.
/// Failed restarts are kept in the history; the call only fails when every
/// restart does.
pub fn minimize_visibility(
    spec: &ObjectiveSpec,
    opts: &MultistartOptions,
) -> Result<OptimizationResult> {
    if opts.restarts == 0 {
        return Err(Error::Optimization("need at least one restart".into()));
    }
    let run = || -> Vec<RestartRecord> {
        (0..opts.restarts)
            .into_par_iter()
            .map(|r| run_restart(spec, opts, r))
            .collect()
    };
    let history = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Optimization(e.to_string()))?
            .install(run),
        None => run(),
    };
    let usable = |r: &&RestartRecord| r.error.is_none() && r.value.is_finite();
    let by_value = |a: &&RestartRecord, b: &&RestartRecord| {
        a.value.total_cmp(&b.value).then(a.restart.cmp(&b.restart))
    };
    // Restarts that hit solver penalties only count when nothing else is left.
    let best = history
        .iter()
        .filter(|r| usable(r) && r.penalties == 0)
        .min_by(by_value)
        .or_else(|| history.iter().filter(usable).min_by(by_value))
        .ok_or_else(|| {
            let first = history
                .iter()
                .find_map(|r| r.error.clone())
                .unwrap_or_default();
            Error::Optimization(format!("all {} restarts failed: {first}", history.len()))
        })?;
    let check = spec.evaluate(&best.x)?;
    let (v_crit, status) = match check.status {
        VisibilityStatus::SolverFailure => (best.value.min(1.0), VisibilityStatus::SolverFailure),
        s => (check.v_crit, s),
    };
    let (alice, bob) = spec.observables(&best.x)?;
    Ok(OptimizationResult {
        v_crit,
        status,
        extended_visibility: best.value,
        parameters: best.x.clone(),
        alice,
        bob,
        best_restart: best.restart,
        iterations: best.iterations,
        converged: best.converged,
        seed: opts.seed,
        history,
    })
}

/// Runs a cheaper search over `stage_kind` observables first and uses its
/// best settings, lifted into `spec`'s parametrization, as the starting point
/// of restart 0. The remaining restarts start at random.
pub fn minimize_visibility_staged(
    spec: &ObjectiveSpec,
    opts: &MultistartOptions,
    stage_kind: ObservableKind,
    stage_opts: &MultistartOptions,
) -> Result<OptimizationResult> {
    let stage_spec =
        ObjectiveSpec::new(spec.state.clone(), spec.noise.clone(), stage_kind, spec.m)?;
    let stage = minimize_visibility(&stage_spec, stage_opts)?;
    let observables: Vec<ObservableSpec> = stage.alice.iter().chain(&stage.bob).cloned().collect();
    let mut opts = opts.clone();
    opts.initial_points.insert(0, spec.lift(&observables)?);
    minimize_visibility(spec, &opts)
}
