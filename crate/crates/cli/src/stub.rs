//! Toy oracle processes for exercising the wire protocol in tests.
//!
//! Each mode reads record ids from standard input and answers on standard
//! output, flushing per line so an interleaved parent never stalls. The
//! misbehaving modes exist to provoke specific protocol errors.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use crate::error::CliError;
use crate::ingest::{ingest, OracleMode};

#[derive(Debug, Clone, clap::Subcommand)]
pub enum StubMode {
    /// Answer every id with predicate 1 and value 1.0.
    Echo,
    /// Answer from a labeled dataset file.
    File { path: PathBuf },
    /// Read all ids to end of input, then answer them in reverse order.
    Reverse {
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Answer the first `n` ids, then exit.
    Partial { n: u64 },
    /// Prepend an answer for an id nobody asked about.
    Rogue,
    /// Answer with an unparseable predicate field.
    Garbled,
}

fn labels_from(path: &PathBuf) -> Result<HashMap<u64, (bool, f64)>, CliError> {
    let ingested = ingest(path, OracleMode::Inline)?;
    Ok(ingested
        .dataset
        .records()
        .iter()
        .map(|r| (r.id(), r.raw_truth().expect("inline ingest labels everything")))
        .collect())
}

fn answer(out: &mut (impl Write + ?Sized), id: u64, truth: (bool, f64)) -> io::Result<()> {
    writeln!(out, "{id},{},{}", u8::from(truth.0), truth.1)?;
    out.flush()
}

pub fn run_stub(mode: &StubMode) -> Result<(), CliError> {
    let stdin = io::stdin().lock();
    let mut out = io::stdout().lock();
    let ids = stdin.lines().map(|line| {
        line.map_err(|e| CliError::Config(format!("stub stdin: {e}")))
            .and_then(|l| {
                l.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Config(format!("stub got a non-id line `{l}`")))
            })
    });
    let emit = |out: &mut dyn Write, id: u64, truth: (bool, f64)| {
        answer(out, id, truth).map_err(|e| CliError::Config(format!("stub stdout: {e}")))
    };
    match mode {
        StubMode::Echo => {
            for id in ids {
                emit(&mut out, id?, (true, 1.0))?;
            }
        }
        StubMode::File { path } => {
            let labels = labels_from(path)?;
            for id in ids {
                let id = id?;
                let truth = labels
                    .get(&id)
                    .copied()
                    .ok_or_else(|| CliError::Config(format!("stub file has no id {id}")))?;
                emit(&mut out, id, truth)?;
            }
        }
        StubMode::Reverse { path } => {
            let labels = path.as_ref().map(labels_from).transpose()?;
            let all: Vec<u64> = ids.collect::<Result<_, _>>()?;
            for &id in all.iter().rev() {
                let truth = match &labels {
                    Some(map) => map
                        .get(&id)
                        .copied()
                        .ok_or_else(|| CliError::Config(format!("stub file has no id {id}")))?,
                    None => (true, 1.0),
                };
                emit(&mut out, id, truth)?;
            }
        }
        StubMode::Partial { n } => {
            for (i, id) in ids.enumerate() {
                if i as u64 >= *n {
                    break;
                }
                emit(&mut out, id?, (true, 1.0))?;
            }
        }
        StubMode::Rogue => {
            let mut first = true;
            for id in ids {
                if first {
                    // u64::MAX can never be a real record id in these tests
                    writeln!(out, "{},1,1.0", u64::MAX)
                        .and_then(|()| out.flush())
                        .map_err(|e| CliError::Config(format!("stub stdout: {e}")))?;
                    first = false;
                }
                emit(&mut out, id?, (true, 1.0))?;
            }
        }
        StubMode::Garbled => {
            for id in ids {
                writeln!(out, "{},maybe,1.0", id?)
                    .and_then(|()| out.flush())
                    .map_err(|e| CliError::Config(format!("stub stdout: {e}")))?;
            }
        }
    }
    Ok(())
}
