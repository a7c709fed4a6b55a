use thiserror::Error;

/// Errors raised by the solver and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid mesh, kernel, scheme or experiment parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with arguments that violate its contract
    /// (wrong axis, mismatched field lengths, negative weight argument, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A field contains non-finite values or violates positivity.
    #[error("numerical state error: {0}")]
    NumericalState(String),

    /// The linear solver ran out of iterations.
    #[error("linear solver failed after {iterations} iterations (relative residual {last_residual:.3e})")]
    SolverFailure {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    /// The Picard loop did not reach its tolerance.
    #[error("step {step}: Picard iteration did not converge in {iterations} iterations (last update {last_update:.3e})")]
    PicardFailure {
        step: usize,
        iterations: usize,
        last_update: f64,
        update_history: Vec<f64>,
    },

    /// Failure inside a time step, tagged with the step index.
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// True for errors caused by the input configuration rather than by the
    /// numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Usage(_) => true,
            Error::Step { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
