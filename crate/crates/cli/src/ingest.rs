//! Delimited-file ingestion and emission.
//!
//! The on-disk format is one comma-separated UTF-8 line per record with LF
//! endings: header `id,proxy,value,predicate`, all fields numeric (predicate
//! strictly 0 or 1). The predicate column may be dropped when labels live in
//! an external oracle process; with inline labels it is mandatory.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use abae_core::{Dataset, Record};

use crate::error::{io_err, CliError};

/// Where record labels come from at query time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Labels are read from the file's own predicate and value columns.
    Inline,
    /// Labels are revealed by an external process; file labels are optional
    /// and ignored by the query path.
    Subprocess,
}

#[derive(Debug)]
pub struct Ingested {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    raw: &str,
    what: &str,
) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {what} from `{}`", raw.trim())))
}

pub fn ingest(path: &Path, mode: OracleMode) -> Result<Ingested, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file, expected a header row"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let labeled = match columns.as_slice() {
        ["id", "proxy", "value", "predicate"] => true,
        ["id", "proxy", "value"] => false,
        _ => {
            return Err(parse_err(
                path,
                1,
                format!("expected header `id,proxy,value[,predicate]`, got `{header}`"),
            ))
        }
    };
    if !labeled && mode == OracleMode::Inline {
        return Err(parse_err(path, 1, "predicate column required"));
    }

    let mut warnings = Vec::new();
    let mut records = Vec::new();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != columns.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let id: u64 = field(path, line, fields[0], "record id")?;
        if let Some(&first) = seen.get(&id) {
            return Err(CliError::DuplicateId {
                path: path.display().to_string(),
                line,
                id,
                first,
            });
        }
        seen.insert(id, line);

        let mut proxy: f64 = field(path, line, fields[1], "proxy score")?;
        if !proxy.is_finite() {
            return Err(parse_err(path, line, "proxy score must be finite"));
        }
        if !(0.0..=1.0).contains(&proxy) {
            warnings.push(format!(
                "{}:{line}: proxy {proxy} outside [0, 1], clamped",
                path.display()
            ));
            proxy = proxy.clamp(0.0, 1.0);
        }

        let value: f64 = field(path, line, fields[2], "value")?;
        if !value.is_finite() {
            return Err(parse_err(path, line, "value must be finite"));
        }

        let truth = if labeled {
            let predicate = match fields[3].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(parse_err(
                        path,
                        line,
                        format!("predicate must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            Some((predicate, value))
        } else {
            None
        };
        records.push(Record::new(id, proxy, truth));
    }

    let dataset = Dataset::new(records).map_err(CliError::Engine)?;
    Ok(Ingested { dataset, warnings })
}

/// Writes a fully labeled dataset in the ingestion format. Floats are
/// printed with the shortest representation that parses back to the same
/// bits, so a write/ingest round trip reproduces the dataset exactly.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<(), CliError> {
    let mut out = String::from("id,proxy,value,predicate\n");
    for record in dataset.records() {
        let (predicate, value) = record.raw_truth().ok_or_else(|| {
            CliError::Config(
                "cannot write a dataset whose labels live in an external oracle".into(),
            )
        })?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            record.id(),
            record.proxy(),
            value,
            u8::from(predicate)
        ));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}
