use thiserror::Error;

/// Errors raised anywhere in the simulation / identification pipeline.
#[derive(Debug, Error)]
pub enum SudsError {
    /// The Pfaffian group block could not be inverted at this shape.
    #[error("singular force-balance constraint at r = {shape:?}: {detail}")]
    SingularConstraint { shape: Vec<f64>, detail: String },

    /// `M_pp + F_p` failed its Cholesky factorization.
    #[error("passive impedance M_pp + F_p is not positive definite at r = {shape:?}")]
    NonDissipative { shape: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate oscillation: second principal variance {second:e} vs first {first:e}")]
    DegenerateOscillation { first: f64, second: f64 },

    #[error("not enough cycles for phase estimation: {cycles:.2} < {required}")]
    TooFewCycles { cycles: f64, required: usize },

    #[error("Fourier design matrix ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("phase bins below the kernel-weight threshold: {bins:?}")]
    InsufficientCoverage { bins: Vec<usize> },

    #[error("template error sum is zero; Γ is undefined")]
    DegenerateTemplate,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SudsError {
    /// Numerical failures (as opposed to bad input) map to exit code 2 in the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SudsError::SingularConstraint { .. }
                | SudsError::NonDissipative { .. }
                | SudsError::DegenerateOscillation { .. }
                | SudsError::TooFewCycles { .. }
                | SudsError::IllConditioned { .. }
                | SudsError::InsufficientCoverage { .. }
                | SudsError::DegenerateTemplate
        )
    }
}

pub type Result<T> = std::result::Result<T, SudsError>;
