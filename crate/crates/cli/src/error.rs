use segplan::curves::CurveError;
use segplan::minbat::MinbatError;
use segplan::reps::RepsError;
use segplan::theory::TheoryError;
use segplan::volumes::{NiftiError, SynthError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad input values, or inputs that violate a precondition.
    #[error("{0}")]
    Usage(String),
    /// Everything else: I/O, malformed files, numerical failure.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<NiftiError> for CliError {
    fn from(e: NiftiError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MinbatError> for CliError {
    fn from(e: MinbatError) -> Self {
        match e {
            MinbatError::Morphology(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<RepsError> for CliError {
    fn from(e: RepsError) -> Self {
        match e {
            RepsError::RejectionCapExhausted { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        match e {
            TheoryError::Quadrature(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CurveError> for CliError {
    fn from(e: CurveError) -> Self {
        match e {
            CurveError::FitFailed { .. } | CurveError::NonFinite { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
