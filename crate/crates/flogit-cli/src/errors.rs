//! CLI failure type and its mapping to process exit codes.

use flogit::error::FlogitError;

/// A command failure carrying enough context for a one-line report and a
/// distinct exit code: 2 usage, 3 parse or I/O, 4 dimension or rank defects,
/// 5 single-class response, 6 separation, 7 non-convergence.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(String),
    Io(String),
    Model(FlogitError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Parse(_) | Self::Io(_) => 3,
            Self::Model(e) => match e {
                FlogitError::InvalidArgument(_) => 2,
                FlogitError::DimensionMismatch(_)
                | FlogitError::OutOfDomain(_)
                | FlogitError::SingularDesign(_)
                | FlogitError::DegenerateScores(_) => 4,
                FlogitError::SingleClass(_) => 5,
                FlogitError::Separation(_) => 6,
                FlogitError::NonConvergence { .. } => 7,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Parse(m) => write!(f, "parse error: {m}"),
            Self::Io(m) => write!(f, "io error: {m}"),
            Self::Model(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FlogitError> for CliError {
    fn from(e: FlogitError) -> Self {
        Self::Model(e)
    }
}
