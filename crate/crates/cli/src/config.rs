//! Query configuration: flag values merged over an optional JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError};

/// One field per `run` setting, everything optional. The same shape serves
/// as the JSON config document and as the bag of flag overrides; flags win
/// field by field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigPatch {
    pub input: Option<PathBuf>,
    pub k: Option<usize>,
    pub n1: Option<u64>,
    pub n2: Option<u64>,
    pub reuse: Option<bool>,
    pub seed: Option<u64>,
    pub resamples: Option<u32>,
    pub alpha: Option<f64>,
    /// Command line for an external oracle process; absent means labels are
    /// read from the input's predicate column.
    pub oracle: Option<String>,
    pub output: Option<PathBuf>,
}

impl RunConfigPatch {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn over(self, base: RunConfigPatch) -> RunConfigPatch {
        RunConfigPatch {
            input: self.input.or(base.input),
            k: self.k.or(base.k),
            n1: self.n1.or(base.n1),
            n2: self.n2.or(base.n2),
            reuse: self.reuse.or(base.reuse),
            seed: self.seed.or(base.seed),
            resamples: self.resamples.or(base.resamples),
            alpha: self.alpha.or(base.alpha),
            oracle: self.oracle.or(base.oracle),
            output: self.output.or(base.output),
        }
    }
}

/// A fully resolved query configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub k: usize,
    pub n1: u64,
    pub n2: u64,
    pub reuse: bool,
    pub seed: u64,
    pub resamples: u32,
    pub alpha: f64,
    pub oracle: Option<String>,
    pub output: Option<PathBuf>,
}

fn require<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required setting `{name}`")))
}

impl RunConfig {
    pub fn resolve(
        flags: RunConfigPatch,
        file: Option<RunConfigPatch>,
    ) -> Result<Self, CliError> {
        let merged = flags.over(file.unwrap_or_default());
        let cfg = RunConfig {
            input: require(merged.input, "input")?,
            k: require(merged.k, "k")?,
            n1: require(merged.n1, "n1")?,
            n2: require(merged.n2, "n2")?,
            reuse: merged.reuse.unwrap_or(false),
            seed: merged.seed.unwrap_or(0),
            resamples: merged.resamples.unwrap_or(1000),
            alpha: merged.alpha.unwrap_or(0.05),
            oracle: merged.oracle,
            output: merged.output,
        };
        for (name, ok) in [
            ("k", cfg.k >= 1),
            ("n1", cfg.n1 >= 1),
            ("n2", cfg.n2 >= 1),
            ("resamples", cfg.resamples >= 1),
        ] {
            if !ok {
                return Err(CliError::Config(format!("`{name}` must be positive")));
            }
        }
        if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
            return Err(CliError::Config(format!(
                "`alpha` must lie strictly between 0 and 1, got {}",
                cfg.alpha
            )));
        }
        Ok(cfg)
    }
}
