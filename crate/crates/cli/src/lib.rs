//! Command-line front end: scenario files in, CSV and JSON artifacts out.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 solver failure,
//! 3 verification failure.

pub mod commands;
pub mod output;
pub mod scenario;

pub use commands::{cmd_plotdata, cmd_solve, cmd_verify, solve_scenario, SolveOptions};
pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("solver failure: {0}")]
    Solver(#[from] cvt_core::CvtError),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(e) if is_input_error(e) => 1,
            CliError::Solver(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

/// Errors that mean the request itself was bad rather than the solve.
fn is_input_error(e: &cvt_core::CvtError) -> bool {
    use cvt_core::CvtError::*;
    match e {
        InvalidInterval { .. }
        | InvalidDensity(_)
        | InvalidConfig(_)
        | CapExceeded { .. }
        | Table { .. } => true,
        InDimension { source, .. } => is_input_error(source),
        _ => false,
    }
}
