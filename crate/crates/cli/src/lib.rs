//! Batch front end for `hjdisc-core`: scenario registry, configuration
//! files and command dispatch.

pub mod commands;
pub mod config;
pub mod output;
pub mod scenarios;

pub use commands::{run, Command, RunSummary};
pub use config::RawConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io(_) => 1,
            Self::Numerical(_) => 2,
            Self::Verification(_) => 3,
        }
    }
}

/// Reads `HJDISC_THREADS`: `None` or `Some(0)` leaves the worker count automatic.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(CliError::Config(format!("HJDISC_THREADS must be a non-negative integer, got `{v}`"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_cap_values() {
        assert_eq!(thread_cap(None).unwrap(), None);
        assert_eq!(thread_cap(Some("0")).unwrap(), None);
        assert_eq!(thread_cap(Some(" 4 ")).unwrap(), Some(4));
        assert!(thread_cap(Some("-1")).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 1);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 2);
        assert_eq!(CliError::Verification(vec![]).exit_code(), 3);
    }
}
