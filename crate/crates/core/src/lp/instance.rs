use serde::Serialize;

use super::simplex::{DenseSimplex, LinearProgram, LpSolver, Relation};
use crate::quantum::ProbabilityTable;
use crate::{Error, Result};

/// Witness distributions must reproduce the marginals this closely.
pub const WITNESS_TOL: f64 = 1e-8;
/// `v_crit` above `1 - SNAP_TOL` is reported as exactly 1.
pub const SNAP_TOL: f64 = 1e-9;

/// A deterministic local strategy: Alice answers `alice[i]` to setting `i`,
/// Bob answers `bob[k]` to setting `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

/// Number of deterministic strategies, `d^(2m)`.
pub fn atom_count(m: usize, d: usize) -> usize {
    d.pow(2 * m as u32)
}

/// Atom index `j` encodes outcome `a_i` as base-`d` digit `i` and `b_k` as
/// digit `m + k`.
pub fn atom_index(assignment: &Assignment, d: usize) -> usize {
    assignment
        .alice
        .iter()
        .chain(&assignment.bob)
        .rev()
        .fold(0, |acc, &x| acc * d + x)
}

pub fn atom_assignment(index: usize, m: usize, d: usize) -> Assignment {
    let mut digits = Vec::with_capacity(2 * m);
    let mut j = index;
    for _ in 0..2 * m {
        digits.push(j % d);
        j /= d;
    }
    let bob = digits.split_off(m);
    Assignment { alice: digits, bob }
}

/// Flat marginal-row indices (in [`ProbabilityTable`] order) touched by an atom.
pub(crate) fn atom_rows(index: usize, m: usize, d: usize) -> impl Iterator<Item = usize> {
    let a = atom_assignment(index, m, d);
    (0..m).flat_map(move |i| {
        let (alice, bob) = (a.alice.clone(), a.bob.clone());
        (0..m).map(move |k| ((i * m + k) * d + alice[i]) * d + bob[k])
    })
}

/// Probability table of a deterministic local strategy.
pub fn deterministic_atom_table(
    assignment: &Assignment,
    m: usize,
    d: usize,
) -> Result<ProbabilityTable> {
    if assignment.alice.len() != m || assignment.bob.len() != m {
        return Err(Error::Scenario(format!(
            "assignment needs {m} outcomes per side"
        )));
    }
    if let Some(x) = assignment
        .alice
        .iter()
        .chain(&assignment.bob)
        .find(|&&x| x >= d)
    {
        return Err(Error::Scenario(format!(
            "outcome {x} out of range for d={d}"
        )));
    }
    let mut data = vec![0.0; m * m * d * d];
    for row in atom_rows(atom_index(assignment, d), m, d) {
        data[row] = 1.0;
    }
    ProbabilityTable::new(m, d, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VisibilityStatus {
    /// A violation exists; `v_crit < 1` with a witness at `v_crit`.
    Optimal,
    /// The signal itself has a local realistic model, `v_crit = 1`.
    NoViolation,
    /// The solver broke down; `v_crit` is NaN.
    SolverFailure,
}

#[derive(Debug, Clone)]
pub struct VisibilityResult {
    pub v_crit: f64,
    pub status: VisibilityStatus,
    /// Joint distribution over all `d^(2m)` atoms.
    pub witness: Option<Vec<f64>>,
    /// Solver message when `status` is `SolverFailure`.
    pub failure: Option<String>,
}

impl VisibilityResult {
    fn failure(msg: String) -> Self {
        Self {
            v_crit: f64::NAN,
            status: VisibilityStatus::SolverFailure,
            witness: None,
            failure: Some(msg),
        }
    }
}

/// The LP `max v` s.t. `marginals(p) - v (S - N) = N`, `p >= 0`, `0 <= v <= 1`.
#[derive(Debug, Clone)]
pub struct LrLpInstance<'a> {
    pub signal: &'a ProbabilityTable,
    pub noise: &'a ProbabilityTable,
}

impl<'a> LrLpInstance<'a> {
    pub fn new(signal: &'a ProbabilityTable, noise: &'a ProbabilityTable) -> Result<Self> {
        if !signal.same_shape(noise) {
            return Err(Error::ShapeMismatch(
                "signal and noise tables differ in shape".into(),
            ));
        }
        Ok(Self { signal, noise })
    }

    pub fn settings(&self) -> usize {
        self.signal.settings()
    }

    pub fn outcomes(&self) -> usize {
        self.signal.outcomes()
    }

    /// Variables: atoms `0..d^(2m)`, then `v`.
    pub fn variable_count(&self) -> usize {
        atom_count(self.settings(), self.outcomes()) + 1
    }

    pub fn constraint_count(&self) -> usize {
        let (m, d) = (self.settings(), self.outcomes());
        m * m * d * d
    }

    /// Builds the LP as a minimization of `-v`. With `cap` false the bound
    /// `v <= 1` is dropped, giving the extended visibility (which can exceed 1).
    pub fn to_linear_program(&self, cap: bool) -> LinearProgram {
        let (m, d) = (self.settings(), self.outcomes());
        let atoms = atom_count(m, d);
        let v = atoms;
        let mut rows: Vec<Vec<(usize, f64)>> =
            vec![Vec::with_capacity(atoms / (d * d) + 1); m * m * d * d];
        for j in 0..atoms {
            for r in atom_rows(j, m, d) {
                rows[r].push((j, 1.0));
            }
        }
        let mut lp = LinearProgram::new(atoms + 1);
        lp.objective[v] = -1.0;
        let (s, n) = (self.signal.as_slice(), self.noise.as_slice());
        for (r, mut terms) in rows.into_iter().enumerate() {
            let coeff = -(s[r] - n[r]);
            if coeff != 0.0 {
                terms.push((v, coeff));
            }
            lp.add_row(terms, Relation::Eq, n[r]);
        }
        if cap {
            lp.add_row(vec![(v, 1.0)], Relation::Le, 1.0);
        }
        lp.names = (0..atoms)
            .map(|j| {
                let a = atom_assignment(j, m, d);
                let digits: String = a
                    .alice
                    .iter()
                    .chain(&a.bob)
                    .map(|x| x.to_string())
                    .collect();
                format!("p{digits}")
            })
            .chain(std::iter::once("v".to_string()))
            .collect();
        lp
    }
}

/// Largest residual of `marginals(witness) - target`.
pub fn marginal_residual(witness: &[f64], target: &[f64], m: usize, d: usize) -> f64 {
    let mut marg = vec![0.0; target.len()];
    for (j, &p) in witness.iter().enumerate() {
        if p != 0.0 {
            for r in atom_rows(j, m, d) {
                marg[r] += p;
            }
        }
    }
    marg.iter()
        .zip(target)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Maximal visibility with the default dense simplex.
pub fn critical_visibility(
    signal: &ProbabilityTable,
    noise: &ProbabilityTable,
) -> Result<VisibilityResult> {
    critical_visibility_with(&DenseSimplex::default(), signal, noise)
}

pub fn critical_visibility_with(
    solver: &dyn LpSolver,
    signal: &ProbabilityTable,
    noise: &ProbabilityTable,
) -> Result<VisibilityResult> {
    let inst = LrLpInstance::new(signal, noise)?;
    if signal.max_abs_difference(noise) <= 1e-12 {
        return Ok(VisibilityResult {
            v_crit: 1.0,
            status: VisibilityStatus::NoViolation,
            witness: None,
            failure: None,
        });
    }
    let (m, d) = (inst.settings(), inst.outcomes());
    let lp = inst.to_linear_program(true);
    let sol = match solver.solve(&lp) {
        Ok(s) => s,
        Err(e) => return Ok(VisibilityResult::failure(e.to_string())),
    };
    let atoms = atom_count(m, d);
    let mut v = sol.x[atoms];
    let witness = sol.x[..atoms].to_vec();
    let total: f64 = witness.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Ok(VisibilityResult::failure(format!(
            "witness sums to {total}"
        )));
    }
    if !(-SNAP_TOL..=1.0 + SNAP_TOL).contains(&v) {
        return Ok(VisibilityResult::failure(format!(
            "visibility {v} out of range"
        )));
    }
    v = v.clamp(0.0, 1.0);
    let status = if v >= 1.0 - SNAP_TOL {
        v = 1.0;
        VisibilityStatus::NoViolation
    } else {
        VisibilityStatus::Optimal
    };
    let target: Vec<f64> = signal
        .as_slice()
        .iter()
        .zip(noise.as_slice())
        .map(|(s, n)| v * s + (1.0 - v) * n)
        .collect();
    let res = marginal_residual(&witness, &target, m, d);
    if res > WITNESS_TOL {
        return Ok(VisibilityResult::failure(format!(
            "witness residual {res:e}"
        )));
    }
    Ok(VisibilityResult {
        v_crit: v,
        status,
        witness: Some(witness),
        failure: None,
    })
}

/// Uncapped visibility `max v` (may exceed 1), or `None` when signal equals noise.
pub fn extended_visibility(
    signal: &ProbabilityTable,
    noise: &ProbabilityTable,
) -> Result<Option<f64>> {
    let inst = LrLpInstance::new(signal, noise)?;
    if signal.max_abs_difference(noise) <= 1e-12 {
        return Ok(None);
    }
    let sol = DenseSimplex::default().solve(&inst.to_linear_program(false))?;
    Ok(Some(sol.x[inst.variable_count() - 1]))
}

#[derive(Debug, Clone)]
pub struct Feasibility {
    pub feasible: bool,
    pub witness: Option<Vec<f64>>,
}

/// Does a joint distribution over all atoms reproduce `table`?
pub fn lr_feasible(table: &ProbabilityTable) -> Result<Feasibility> {
    let (m, d) = (table.settings(), table.outcomes());
    let atoms = atom_count(m, d);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m * m * d * d];
    for j in 0..atoms {
        for r in atom_rows(j, m, d) {
            rows[r].push((j, 1.0));
        }
    }
    let mut lp = LinearProgram::new(atoms);
    for (r, terms) in rows.into_iter().enumerate() {
        lp.add_row(terms, Relation::Eq, table.as_slice()[r]);
    }
    match DenseSimplex::default().solve(&lp) {
        Ok(sol) => {
            let res = marginal_residual(&sol.x, table.as_slice(), m, d);
            if res > WITNESS_TOL {
                return Ok(Feasibility {
                    feasible: false,
                    witness: None,
                });
            }
            Ok(Feasibility {
                feasible: true,
                witness: Some(sol.x),
            })
        }
        Err(super::simplex::LpError::Infeasible(_)) => Ok(Feasibility {
            feasible: false,
            witness: None,
        }),
        Err(e) => Err(e.into()),
    }
}
