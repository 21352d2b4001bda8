//! CLI failure type and its process exit-code mapping.

use std::path::PathBuf;

use mentor_core::checkpoint::CheckpointError;
use mentor_core::config::ConfigError;
use mentor_core::feedback_loop::{LoopError, ReplayViolation};
use mentor_core::harness::HarnessError;
use mentor_core::protocol::ProtocolError;
use thiserror::Error;

/// Process exit codes, fixed as part of the CLI contract.
pub mod exit_code {
    /// A replay violation (or another broken internal invariant).
    pub const VIOLATION: i32 = 1;
    /// Configuration or usage problem.
    pub const CONFIG: i32 = 2;
    /// Teacher protocol failure: unreachable, timeout, malformed message,
    /// out-of-vocabulary token.
    pub const PROTOCOL: i32 = 3;
    /// Filesystem problem reading or writing artifacts.
    pub const IO: i32 = 4;
}

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{path}: {violation}")]
    Replay {
        path: PathBuf,
        violation: ReplayViolation,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit_code::CONFIG,
            CliError::Protocol(_) => exit_code::PROTOCOL,
            CliError::Replay { .. } => exit_code::VIOLATION,
            CliError::Checkpoint(_) | CliError::Io { .. } => exit_code::IO,
            CliError::Harness(e) => harness_code(e),
        }
    }
}

fn harness_code(err: &HarnessError) -> i32 {
    match err {
        HarnessError::Config(_) | HarnessError::Env(_) => exit_code::CONFIG,
        HarnessError::Loop(LoopError::Teacher(_)) => exit_code::PROTOCOL,
        // A stepped-after-end environment is a broken internal invariant.
        HarnessError::Loop(LoopError::Env(_)) => exit_code::VIOLATION,
        HarnessError::Io { .. } => exit_code::IO,
        HarnessError::SeedFailed { source, .. } => harness_code(source),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn codes_follow_the_documented_contract() {
        let usage = CliError::Usage("bad flag".to_string());
        assert_eq!(usage.code(), 2);
        let config = CliError::Config(ConfigError::UnknownKey {
            key: "x".to_string(),
        });
        assert_eq!(config.code(), 2);
        let protocol = CliError::Protocol(ProtocolError::Timeout(Duration::from_secs(1)));
        assert_eq!(protocol.code(), 3);
        let replay = CliError::Replay {
            path: PathBuf::from("trace.jsonl"),
            violation: ReplayViolation::StepOrder {
                episode: 3,
                t: 5,
                expected: 4,
            },
        };
        assert_eq!(replay.code(), 1);
        assert!(replay.to_string().contains("episode 3"));
        assert!(replay.to_string().contains("step 5"));
        let io = CliError::Io {
            path: PathBuf::from("metrics.csv"),
            source: std::io::Error::new(std::io::ErrorKind::PermissionDenied, "denied"),
        };
        assert_eq!(io.code(), 4);
    }

    #[test]
    fn seed_failures_take_the_code_of_their_cause() {
        let inner = HarnessError::Loop(LoopError::Teacher(ProtocolError::ConnectionClosed));
        let err = CliError::Harness(HarnessError::SeedFailed {
            seed: 4,
            source: Box::new(inner),
            partial: Box::new(mentor_core::harness::ExperimentOutput {
                metrics: mentor_core::harness::MetricsSeries::default(),
                artifacts: Vec::new(),
            }),
        });
        assert_eq!(err.code(), 3);
        assert!(err.to_string().contains("seed 4"));
    }
}
