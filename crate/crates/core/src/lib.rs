//! Noise robustness of two-qudit nonclassicality.
//!
//! The critical visibility of a state for a given set of local measurements is
//! the largest weight `v` such that `v * signal + (1 - v) * noise` still admits
//! a joint distribution over all outcomes of all settings (a local realistic
//! model). It is computed exactly by linear programming ([`lp`]) and then
//! minimized over the measurement parametrization ([`optimize`]).
//!
//! Module map:
//!
//! - [`quantum`]: states, measurement unitaries, noise models, probability tables.
//! - [`lp`]: the local-realistic LP, an in-repo simplex solver and a warm-started
//!   evaluator for the optimizer's inner loop.
//! - [`cglmp`]: the CGLMP inequality, used as an independent cross-check.
//! - [`optimize`]: Nelder-Mead, multistart minimization and grid scans.
//! - [`scenarios`]: catalog of named states.

pub mod cglmp;
pub mod error;
pub mod lp;
pub mod optimize;
pub mod quantum;
pub mod scenarios;

pub use error::{Error, Result};
