use thiserror::Error;

/// Errors produced anywhere in the synthesis pipeline.
///
/// The variants map one-to-one onto the CLI exit codes (see [`PcrError::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcrError {
    #[error("configuration error: {0}")]
    Config(String),

    /// A detuning entering a perturbative denominator is (nearly) zero.
    #[error("resonance error: {0}")]
    Resonance(String),

    /// Eigenvector assignment failed: the effective computational model is not valid here.
    #[error("hybridization error: computational state {state} best overlap {overlap:.3} below {threshold}")]
    Hybridization {
        state: String,
        overlap: f64,
        threshold: f64,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("seeding error: {0}")]
    Seeding(String),

    #[error("optimization did not converge after {iterations} major iterations")]
    NonConvergence { iterations: usize },

    #[error("load error in {path}: {field}: {message}")]
    Load {
        path: String,
        field: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl PcrError {
    pub fn config(msg: impl Into<String>) -> Self {
        PcrError::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        PcrError::Numeric(msg.into())
    }

    /// Process exit code: 2 config, 3 numeric, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            PcrError::Config(_) | PcrError::Load { .. } | PcrError::Io(_) | PcrError::Seeding(_) => 2,
            PcrError::Resonance(_) | PcrError::Hybridization { .. } | PcrError::Numeric(_) => 3,
            PcrError::NonConvergence { .. } => 4,
        }
    }
}

impl From<std::io::Error> for PcrError {
    fn from(e: std::io::Error) -> Self {
        PcrError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PcrError>;
