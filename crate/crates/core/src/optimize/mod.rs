//! Minimization of the critical visibility over measurement settings.

pub mod multistart;
pub mod nelder_mead;
pub mod objective;
pub mod scan;

pub use multistart::{
    minimize_visibility, minimize_visibility_staged, random_start, MultistartOptions,
    OptimizationResult, RestartRecord,
};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use objective::{Objective, ObjectiveSpec};
pub use scan::{crossings, degree_range, grid, scan_family, ScanOptions, ScanRecord, ScanTemplate};
