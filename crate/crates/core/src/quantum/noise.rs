use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use super::{CMatrix, Party, QuditState};
use crate::{Error, Result};

/// What the signal state is mixed with.
#[derive(Debug, Clone)]
pub enum NoiseModel {
    /// Maximally mixed state `1/d^2`.
    White,
    /// `rho_A (x) rho_B`, the product of the signal's reduced states.
    Product,
    /// Diagonal part of the signal in the computational (Schmidt) basis.
    Dephasing,
    /// A user-supplied density matrix.
    Custom(QuditState),
}

impl NoiseModel {
    /// True when the noise table does not depend on the measurement settings.
    pub fn is_setting_independent(&self) -> bool {
        matches!(self, Self::White)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::White => "white",
            Self::Product => "product",
            Self::Dephasing => "dephasing",
            Self::Custom(_) => "custom",
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Parses the built-in models; custom noise is read from a file instead.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "white" => Ok(Self::White),
            "product" => Ok(Self::Product),
            "dephasing" | "dephased" => Ok(Self::Dephasing),
            other => Err(Error::InvalidNoise(format!(
                "unknown noise model '{other}'"
            ))),
        }
    }
}

/// Compiles the noise density matrix for `signal`.
pub fn noise_state(model: &NoiseModel, signal: &QuditState) -> Result<QuditState> {
    let d = signal.dim();
    match model {
        NoiseModel::White => {
            let rho = CMatrix::identity(d * d, d * d).scale(1.0 / (d * d) as f64);
            QuditState::mixed(d, rho)
        }
        NoiseModel::Product => {
            let ra = signal.reduced_state(Party::A);
            let rb = signal.reduced_state(Party::B);
            let rho = ra.kronecker(&rb);
            // Kronecker products of valid states carry ~1e-16 asymmetry.
            QuditState::mixed(d, (&rho + rho.adjoint()).scale(0.5))
        }
        NoiseModel::Dephasing => {
            let rho = signal.density_matrix();
            QuditState::mixed(
                d,
                CMatrix::from_diagonal(&DVector::from_iterator(
                    d * d,
                    rho.diagonal().iter().map(|z| z.re.into()),
                )),
            )
        }
        NoiseModel::Custom(state) => {
            if state.dim() != d {
                return Err(Error::InvalidNoise(format!(
                    "custom noise has d={}, signal has d={d}",
                    state.dim()
                )));
            }
            Ok(state.clone())
        }
    }
}
