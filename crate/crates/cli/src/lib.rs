//! Config-driven entry points for `fracpme`: operator self-test, single resolvent
//! solves, trajectories, the separable profile, diagnostics over saved trajectories,
//! and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Failure(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
}

impl CliError {
    /// 1 criterion failure, 2 configuration or input error, 3 solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<fracpme::Error> for CliError {
    fn from(e: fracpme::Error) -> Self {
        match e {
            fracpme::Error::Io(s) => CliError::Io(s),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        assert_eq!(CliError::Failure("criterion 6".into()).exit_code(), 1);
        assert_eq!(CliError::Config("bad".into()).exit_code(), 2);
        assert_eq!(CliError::Io("missing".into()).exit_code(), 2);
        assert_eq!(CliError::NonConvergence("step 3".into()).exit_code(), 3);
        assert!(matches!(CliError::from(fracpme::Error::Io("x".into())), CliError::Io(_)));
        assert!(matches!(CliError::from(fracpme::Error::UnknownBackend("x".into())), CliError::Config(_)));
    }
}
