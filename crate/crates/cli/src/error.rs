use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files. Exit code 2.
    #[error("{0}")]
    Usage(String),

    /// The computation itself failed. Exit code 3.
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Compute(_) => 3,
        }
    }

    pub fn write(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::Compute(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<bellmap::Error> for CliError {
    fn from(e: bellmap::Error) -> Self {
        use bellmap::Error as E;
        match e {
            E::Optimization(_) | E::Solver(_) | E::NonFinite { .. } => Self::Compute(e.to_string()),
            E::Io(_) => Self::Compute(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}
