//! States, measurement unitaries, noise models and joint outcome tables.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub mod io;
pub mod noise;
pub mod observable;
pub mod state;
pub mod table;

pub type CMatrix = DMatrix<Complex64>;

pub use noise::{noise_state, NoiseModel};
pub use observable::{
    fourier_matrix, givens_decompose, unitarity_deviation, ObservableKind, ObservableSpec,
};
pub use state::{Party, QuditState};
pub use table::{mix_tables, probability_table, ProbabilityTable};
