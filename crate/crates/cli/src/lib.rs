//! Building blocks for the `abae` binary: file ingestion, the external
//! oracle protocol, configuration merging, and report shaping. Kept as a
//! library so the pieces are testable without spawning the binary.

pub mod config;
pub mod error;
pub mod ingest;
pub mod oracle;
pub mod report;
pub mod stub;

pub use config::{RunConfig, RunConfigPatch};
pub use error::CliError;
pub use ingest::{ingest, write_dataset, Ingested, OracleMode};
pub use oracle::{subprocess_oracle, SubprocessOracle};
pub use report::RunReport;
