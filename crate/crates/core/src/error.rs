use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("expected at least {expected} component values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("brute-force enumeration supports at most {max} components, structure has {got}")]
    TooManyComponents { got: usize, max: usize },

    #[error("component c{} appears more than once; partial derivatives need single-occurrence trees", .0 + 1)]
    RepeatedComponent(usize),

    #[error("sample of size {got} is too small, need at least {min}")]
    SampleTooSmall { got: usize, min: usize },

    #[error("degenerate sample: all log-times are identical")]
    DegenerateSample,

    #[error("reliability {0} is on the boundary, transform is undefined")]
    Boundary(f64),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("singular information matrix for component {0}")]
    SingularInformation(usize),

    #[error("need at least {min} observed failures, got {got}")]
    InsufficientFailures { got: usize, min: usize },

    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::InvalidStructure(_)
            | Error::Input(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::SampleTooSmall { .. }
            | Error::DegenerateSample
            | Error::NonConvergence { .. }
            | Error::SingularInformation(_)
            | Error::InsufficientFailures { .. } => 3,
            Error::InvalidParameter(_)
            | Error::ProbabilityOutOfRange(_)
            | Error::LengthMismatch { .. }
            | Error::TooManyComponents { .. }
            | Error::RepeatedComponent(_)
            | Error::Boundary(_) => 4,
        }
    }
}
