use thiserror::Error;

pub type Result<T, E = OddsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OddsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("krylov solver did not converge after {restarts} restarts (max residual {residual:.3e})")]
    SolverFailure { residual: f64, restarts: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last update {update:.3e})")]
    FixedPointFailure { iterations: usize, update: f64 },

    #[error("step {step} failed: {source}")]
    StepFailure {
        step: usize,
        #[source]
        source: Box<OddsError>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl OddsError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        OddsError::StepFailure { step, source: Box::new(self) }
    }

    /// True for errors raised by a numerical routine rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            OddsError::SolverFailure { .. } | OddsError::FixedPointFailure { .. } => true,
            OddsError::StepFailure { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(OddsError::DimensionMismatch { expected, found })
    }
}
