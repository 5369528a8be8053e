use abae_core::AbaeError;
use thiserror::Error;

/// Everything the binary can fail with, partitioned by exit code: 2 for
/// configuration problems, 3 for a bound validation that ran but found
/// violations, 1 for everything that goes wrong while working.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: duplicate record id {id}, first defined on line {first}")]
    DuplicateId {
        path: String,
        line: usize,
        id: u64,
        first: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Engine(#[from] AbaeError),

    #[error("{failed} of {total} bound checks failed")]
    BoundsFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            // a stratum count the dataset cannot support and malformed
            // engine inputs are configuration mistakes, not runtime faults
            CliError::Engine(AbaeError::InvalidK { .. })
            | CliError::Engine(AbaeError::InvalidSpec(_)) => 2,
            CliError::BoundsFailed { .. } => 3,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_partition_the_error_space() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::Engine(AbaeError::InvalidK { k: 5, len: 2 }).exit_code(),
            2
        );
        assert_eq!(
            CliError::Engine(AbaeError::InvalidSpec("bad".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::BoundsFailed {
                failed: 1,
                total: 5
            }
            .exit_code(),
            3
        );
        assert_eq!(
            CliError::Engine(AbaeError::NoPositiveSamples).exit_code(),
            1
        );
        assert_eq!(
            CliError::Engine(AbaeError::OracleProtocol("x".into())).exit_code(),
            1
        );
        assert_eq!(
            CliError::Parse {
                path: "d.csv".into(),
                line: 3,
                msg: "x".into()
            }
            .exit_code(),
            1
        );
        assert_eq!(
            CliError::DuplicateId {
                path: "d.csv".into(),
                line: 4,
                id: 9,
                first: 2
            }
            .exit_code(),
            1
        );
    }
}
