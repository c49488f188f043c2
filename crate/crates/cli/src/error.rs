use effcond::conductivity::DomainError;
use effcond::eisenstein::EisensteinError;
use effcond::geometry::GeometryError;
use effcond::lattice_sums::LatticeError;
use effcond_symbolic::SymbolicError;
use thiserror::Error;

/// Exit code for a command-line usage error.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for rejected input values or files.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for a failure during the computation itself.
pub const EXIT_COMPUTATION: i32 = 3;

/// A failed command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("computation failed: {0}")]
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Computation(_) => EXIT_COMPUTATION,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::PackingFailure { .. } => Self::Computation(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::Truncation { .. } => Self::Validation(e.to_string()),
            LatticeError::DivergenceGuard { .. } => Self::Computation(e.to_string()),
        }
    }
}

impl From<EisensteinError> for CliError {
    fn from(e: EisensteinError) -> Self {
        match e {
            EisensteinError::InvalidDegree(_) | EisensteinError::InvalidOrder(_) => Self::Validation(e.to_string()),
            _ => Self::Computation(e.to_string()),
        }
    }
}

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<SymbolicError> for CliError {
    fn from(e: SymbolicError) -> Self {
        match e {
            SymbolicError::InvalidInput(message) => Self::Validation(message),
            _ => Self::Computation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Computation(format!("cannot write output: {e}"))
    }
}
