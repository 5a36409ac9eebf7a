use crate::lp::{critical_visibility, RatioEvaluator, VisibilityResult, VisibilityStatus};
use crate::quantum::observable::compile_angles;
use crate::quantum::table::BornKernel;
use crate::quantum::{
    givens_decompose, noise_state, CMatrix, NoiseModel, ObservableKind, ObservableSpec,
    ProbabilityTable, QuditState,
};
use crate::{Error, Result};

/// Upper limit on the number of LP variables an objective may create.
pub const MAX_ATOMS: usize = 1 << 20;

/// Extended visibilities are clipped here so that locally modelled signals
/// still give finite objective values.
pub const EXTENDED_CAP: f64 = 10.0;

/// What is minimized: the critical visibility of `state` against `noise` when
/// both parties measure `m` observables of class `kind`.
///
/// The parameter vector holds, for Alice's settings then Bob's, the free
/// angles of each observable: all angles of `kind` except `frozen` ones (held
/// at zero) and, for the full unitary, the gauge phases.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub state: QuditState,
    pub noise: NoiseModel,
    pub kind: ObservableKind,
    pub m: usize,
    frozen: Vec<usize>,
    free: Vec<usize>,
    noise_state: Option<QuditState>,
}

impl ObjectiveSpec {
    pub fn new(
        state: QuditState,
        noise: NoiseModel,
        kind: ObservableKind,
        m: usize,
    ) -> Result<Self> {
        let d = state.dim();
        if m == 0 {
            return Err(Error::Scenario(
                "need at least one setting per party".into(),
            ));
        }
        let atoms = (d as f64).powi(2 * m as i32);
        if atoms > MAX_ATOMS as f64 {
            return Err(Error::Unsupported(format!(
                "d={d}, m={m} gives {atoms} LP variables"
            )));
        }
        let noise_state = if noise.is_setting_independent() {
            None
        } else {
            Some(noise_state(&noise, &state)?)
        };
        let mut spec = Self {
            state,
            noise,
            kind,
            m,
            frozen: Vec::new(),
            free: Vec::new(),
            noise_state,
        };
        spec.free = spec.compute_free();
        Ok(spec)
    }

    /// Holds the given per-observable angle indices (0-based) at zero.
    pub fn with_frozen(mut self, frozen: &[usize]) -> Result<Self> {
        let n = self.angles_per_observable();
        if let Some(&bad) = frozen.iter().find(|&&i| i >= n) {
            return Err(Error::Parametrization(format!(
                "frozen index {bad} out of range for {} at d={} ({n} angles)",
                self.kind,
                self.dim()
            )));
        }
        self.frozen = frozen.to_vec();
        self.frozen.sort_unstable();
        self.frozen.dedup();
        self.free = self.compute_free();
        Ok(self)
    }

    fn compute_free(&self) -> Vec<usize> {
        let gauge = self.kind.gauge_indices(self.dim());
        (0..self.angles_per_observable())
            .filter(|i| !self.frozen.contains(i) && !gauge.contains(i))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn frozen(&self) -> &[usize] {
        &self.frozen
    }

    pub fn angles_per_observable(&self) -> usize {
        self.kind.angle_count(self.dim())
    }

    pub fn free_per_observable(&self) -> usize {
        self.free.len()
    }

    /// Length of the parameter vector, `2 m` times the free angles per observable.
    pub fn parameter_count(&self) -> usize {
        2 * self.m * self.free.len()
    }

    /// Full angle vectors of the `2 m` observables (Alice's first).
    pub fn expand(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.parameter_count() {
            return Err(Error::Parametrization(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                x.len()
            )));
        }
        let nf = self.free.len();
        Ok((0..2 * self.m)
            .map(|o| {
                let mut full = vec![0.0; self.angles_per_observable()];
                for (t, &idx) in self.free.iter().enumerate() {
                    full[idx] = x[o * nf + t];
                }
                full
            })
            .collect())
    }

    /// Inverse of [`Self::expand`] on the free coordinates.
    pub fn compress(&self, observables: &[ObservableSpec]) -> Result<Vec<f64>> {
        if observables.len() != 2 * self.m {
            return Err(Error::Parametrization(format!(
                "expected {} observables",
                2 * self.m
            )));
        }
        let mut x = Vec::with_capacity(self.parameter_count());
        for o in observables {
            if o.kind != self.kind || o.dim != self.dim() {
                return Err(Error::Parametrization(
                    "observable kind or dimension mismatch".into(),
                ));
            }
            x.extend(self.free.iter().map(|&i| o.angles[i]));
        }
        Ok(x)
    }

    /// Parameter vector reproducing the statistics of `observables` (Alice's
    /// then Bob's), which may be of another kind when this objective uses the
    /// full unitary group. Frozen angles of the source are dropped as is.
    pub fn lift(&self, observables: &[ObservableSpec]) -> Result<Vec<f64>> {
        if observables.len() != 2 * self.m {
            return Err(Error::Parametrization(format!(
                "expected {} observables",
                2 * self.m
            )));
        }
        let mut x = Vec::with_capacity(self.parameter_count());
        for o in observables {
            if o.dim != self.dim() {
                return Err(Error::Parametrization(
                    "observable dimension mismatch".into(),
                ));
            }
            let angles = if o.kind == self.kind {
                o.angles.clone()
            } else if self.kind == ObservableKind::FullUnitary {
                gauge_fixed_angles(&o.compile())?
            } else {
                return Err(Error::Unsupported(format!(
                    "cannot express {} through {}",
                    o.kind, self.kind
                )));
            };
            x.extend(self.free.iter().map(|&i| angles[i]));
        }
        Ok(x)
    }

    pub fn observables(&self, x: &[f64]) -> Result<(Vec<ObservableSpec>, Vec<ObservableSpec>)> {
        let mut specs = self
            .expand(x)?
            .into_iter()
            .map(|angles| ObservableSpec::new(self.kind, self.dim(), angles))
            .collect::<Result<Vec<_>>>()?;
        let bob = specs.split_off(self.m);
        Ok((specs, bob))
    }

    /// Signal and noise tables at `x`.
    pub fn tables(&self, x: &[f64]) -> Result<(ProbabilityTable, ProbabilityTable)> {
        let (alice, bob) = self.observables(x)?;
        let signal = crate::quantum::probability_table(&self.state, &alice, &bob)?;
        let noise = match &self.noise_state {
            None => ProbabilityTable::uniform(self.m, self.dim())?,
            Some(n) => crate::quantum::probability_table(n, &alice, &bob)?,
        };
        Ok((signal, noise))
    }

    /// Critical visibility at `x` through the general LP.
    pub fn evaluate(&self, x: &[f64]) -> Result<VisibilityResult> {
        let (s, n) = self.tables(x)?;
        critical_visibility(&s, &n)
    }

    /// Fresh evaluator for one optimization run.
    pub fn objective(&self, warm_start: bool) -> Objective<'_> {
        Objective::new(self, warm_start)
    }
}

/// Givens angles of `diag(e^{-i delta}) u`, whose trailing phases vanish;
/// the row phases do not change detection statistics.
fn gauge_fixed_angles(u: &CMatrix) -> Result<Vec<f64>> {
    let d = u.nrows();
    let angles = givens_decompose(u)?;
    let delta = &angles[d * (d - 1)..];
    let mut v = u.clone();
    for (r, &t) in delta.iter().enumerate() {
        let ph = num_complex::Complex64::from_polar(1.0, -t);
        for c in 0..d {
            v[(r, c)] *= ph;
        }
    }
    givens_decompose(&v)
}

/// Stateful objective function: extended visibility at a parameter vector,
/// computed through the warm-started evaluator.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    spec: &'a ObjectiveSpec,
    signal_kernel: BornKernel,
    noise_kernel: Option<BornKernel>,
    uniform: Vec<f64>,
    evaluator: RatioEvaluator,
    warm_start: bool,
    signal: Vec<f64>,
    noise: Vec<f64>,
    unitaries: Vec<CMatrix>,
    full: Vec<f64>,
    /// Evaluations that fell back to the general LP.
    pub fallbacks: usize,
    /// Evaluations where both LP paths failed; these score 1.
    pub penalties: usize,
    pub evaluations: usize,
}

impl<'a> Objective<'a> {
    fn new(spec: &'a ObjectiveSpec, warm_start: bool) -> Self {
        let (m, d) = (spec.m, spec.dim());
        let size = m * m * d * d;
        Self {
            spec,
            signal_kernel: BornKernel::new(&spec.state),
            noise_kernel: spec.noise_state.as_ref().map(BornKernel::new),
            uniform: vec![1.0 / (d * d) as f64; size],
            evaluator: RatioEvaluator::new(m, d),
            warm_start,
            signal: vec![0.0; size],
            noise: vec![0.0; size],
            unitaries: Vec::with_capacity(2 * m),
            full: vec![0.0; spec.angles_per_observable()],
            fallbacks: 0,
            penalties: 0,
            evaluations: 0,
        }
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        self.spec
    }

    fn fill_tables(&mut self, x: &[f64]) {
        let spec = self.spec;
        let (m, d) = (spec.m, spec.dim());
        let nf = spec.free.len();
        self.unitaries.clear();
        for o in 0..2 * m {
            for (t, &idx) in spec.free.iter().enumerate() {
                self.full[idx] = x[o * nf + t];
            }
            self.unitaries
                .push(compile_angles(spec.kind, d, &self.full));
        }
        let (ua, ub) = self.unitaries.split_at(m);
        self.signal_kernel.fill(ua, ub, &mut self.signal);
        match &self.noise_kernel {
            Some(k) => k.fill(ua, ub, &mut self.noise),
            None => self.noise.copy_from_slice(&self.uniform),
        }
    }

    /// Extended visibility at `x`, clipped to [`EXTENDED_CAP`]. Values below 1
    /// are critical visibilities.
    pub fn value(&mut self, x: &[f64]) -> Result<f64> {
        if x.len() != self.spec.parameter_count() {
            return Err(Error::Parametrization(format!(
                "expected {} parameters, got {}",
                self.spec.parameter_count(),
                x.len()
            )));
        }
        self.evaluations += 1;
        self.fill_tables(x);
        if !self.warm_start {
            self.evaluator.reset();
        }
        match self
            .evaluator
            .extended_visibility(&self.signal, &self.noise)
        {
            Ok(v) => Ok(v.min(EXTENDED_CAP)),
            Err(_) => {
                self.fallbacks += 1;
                self.evaluator.reset();
                let m = self.spec.m;
                let d = self.spec.dim();
                let fallback = ProbabilityTable::new(m, d, self.signal.clone())
                    .and_then(|s| Ok((s, ProbabilityTable::new(m, d, self.noise.clone())?)))
                    .and_then(|(s, n)| critical_visibility(&s, &n));
                match fallback {
                    Ok(r) if r.status != VisibilityStatus::SolverFailure => Ok(r.v_crit),
                    _ => {
                        self.penalties += 1;
                        Ok(1.0)
                    }
                }
            }
        }
    }
}
