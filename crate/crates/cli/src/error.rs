use thiserror::Error;

use proxlin::Error as SolverError;

/// Exit code 2 for usage errors, 1 for everything that failed at run time.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Solver(SolverError),

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    /// Parameter errors stem from the configuration; the rest are failed runs.
    pub fn from_solver(e: SolverError) -> Self {
        match e {
            SolverError::InvalidParameter(msg) => CliError::Usage(msg),
            e @ (SolverError::InvalidMuTilde { .. }
            | SolverError::InvalidRateConstants { .. }
            | SolverError::BudgetTooSmall { .. }) => CliError::Usage(e.to_string()),
            e => CliError::Solver(e),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
