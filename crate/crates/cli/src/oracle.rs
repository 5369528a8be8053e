//! External predicate oracle spoken over pipes.
//!
//! Wire protocol: the parent writes one ASCII decimal record id per line to
//! the child's standard input; the child answers `id,predicate,value` lines
//! (predicate strictly 0 or 1) on its standard output, in any order. Every
//! requested id must be answered exactly once before the child exits.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use abae_core::{AbaeError, Record, RecordOracle};

fn protocol(msg: impl Into<String>) -> AbaeError {
    AbaeError::OracleProtocol(msg.into())
}

fn parse_response(line: &str) -> Result<(u64, bool, f64), AbaeError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 3 {
        return Err(protocol(format!(
            "expected `id,predicate,value`, got `{line}`"
        )));
    }
    let id: u64 = fields[0]
        .trim()
        .parse()
        .map_err(|_| protocol(format!("cannot parse id in `{line}`")))?;
    let predicate = match fields[1].trim() {
        "0" => false,
        "1" => true,
        _ => return Err(protocol(format!("predicate must be 0 or 1 in `{line}`"))),
    };
    let value: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| protocol(format!("cannot parse value in `{line}`")))?;
    if !value.is_finite() {
        return Err(protocol(format!("value must be finite in `{line}`")));
    }
    Ok((id, predicate, value))
}

fn sorted(ids: &HashSet<u64>) -> Vec<u64> {
    let mut v: Vec<u64> = ids.iter().copied().collect();
    v.sort_unstable();
    v
}

/// A running oracle process driven one id at a time.
///
/// `reveal` requests the record's id and reads until that id's answer
/// arrives; answers for other outstanding ids met along the way are kept
/// for later. The budget ledger upstream already caches reveals, so each id
/// crosses the pipe at most once.
pub struct SubprocessOracle {
    child: Child,
    stdin: Option<ChildStdin>,
    reader: BufReader<ChildStdout>,
    pending: HashMap<u64, (bool, f64)>,
    requested: HashSet<u64>,
    answered: HashSet<u64>,
}

impl SubprocessOracle {
    /// Starts `command` through `sh -c` with piped standard input/output.
    pub fn spawn(command: &str) -> Result<Self, AbaeError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| protocol(format!("cannot start oracle `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        Ok(Self {
            child,
            stdin: Some(stdin),
            reader: BufReader::new(stdout),
            pending: HashMap::new(),
            requested: HashSet::new(),
            answered: HashSet::new(),
        })
    }

    /// Reads one response line. `Ok(None)` means the child closed its output.
    fn read_one(&mut self) -> Result<Option<(u64, (bool, f64))>, AbaeError> {
        let mut line = String::new();
        let n = self
            .reader
            .read_line(&mut line)
            .map_err(|e| protocol(format!("cannot read from oracle: {e}")))?;
        if n == 0 {
            return Ok(None);
        }
        let (id, predicate, value) = parse_response(line.trim_end())?;
        if !self.requested.contains(&id) {
            return Err(protocol(format!("oracle answered id {id}, never requested")));
        }
        if !self.answered.insert(id) {
            return Err(protocol(format!("oracle answered id {id} twice")));
        }
        Ok(Some((id, (predicate, value))))
    }

    fn unanswered(&self) -> Vec<u64> {
        sorted(&(&self.requested - &self.answered))
    }

    pub fn fetch(&mut self, id: u64) -> Result<(bool, f64), AbaeError> {
        if let Some(hit) = self.pending.remove(&id) {
            return Ok(hit);
        }
        self.requested.insert(id);
        if let Some(stdin) = self.stdin.as_mut() {
            // a write failure means the child is gone; the drain below will
            // hit EOF and report exactly which ids went unanswered
            let _ = writeln!(stdin, "{id}");
            let _ = stdin.flush();
        }
        loop {
            match self.read_one()? {
                None => {
                    return Err(protocol(format!(
                        "oracle exited before answering ids {:?}",
                        self.unanswered()
                    )))
                }
                Some((got, truth)) if got == id => return Ok(truth),
                Some((got, truth)) => {
                    self.pending.insert(got, truth);
                }
            }
        }
    }
}

impl RecordOracle for SubprocessOracle {
    fn reveal(&mut self, record: &Record) -> Result<(bool, f64), AbaeError> {
        self.fetch(record.id())
    }
}

impl Drop for SubprocessOracle {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Batch form: requests every id up front, closes the pipe, and collects the
/// full response set. The returned triples follow the request order even
/// when the child answers out of order.
pub fn subprocess_oracle(command: &str, ids: &[u64]) -> Result<Vec<(u64, bool, f64)>, AbaeError> {
    let mut oracle = SubprocessOracle::spawn(command)?;
    {
        let mut stdin = oracle.stdin.take().expect("freshly spawned");
        for &id in ids {
            oracle.requested.insert(id);
            let _ = writeln!(stdin, "{id}");
        }
        let _ = stdin.flush();
        // closing the pipe lets batch-style children read to EOF first
    }
    let mut got: HashMap<u64, (bool, f64)> = HashMap::new();
    while got.len() < oracle.requested.len() {
        match oracle.read_one()? {
            None => {
                return Err(protocol(format!(
                    "oracle exited before answering ids {:?}",
                    oracle.unanswered()
                )))
            }
            Some((id, truth)) => {
                got.insert(id, truth);
            }
        }
    }
    Ok(ids
        .iter()
        .map(|&id| {
            let (predicate, value) = got[&id];
            (id, predicate, value)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_lines_parse_strictly() {
        assert_eq!(parse_response("7,1,2.5").unwrap(), (7, true, 2.5));
        assert_eq!(parse_response("0,0,-1").unwrap(), (0, false, -1.0));
        for bad in ["7,1", "7,1,2.5,9", "x,1,2.5", "7,yes,2.5", "7,2,2.5", "7,1,inf"] {
            assert!(parse_response(bad).is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn batch_round_trip_through_a_shell_oracle() {
        // the shell child answers every id with predicate 1 and value = id
        let got = subprocess_oracle("while read i; do echo \"$i,1,$i\"; done", &[3, 1, 2]).unwrap();
        assert_eq!(got, vec![(3, true, 3.0), (1, true, 1.0), (2, true, 2.0)]);
    }

    #[test]
    fn out_of_order_responses_are_reassembled() {
        let got = subprocess_oracle("tac | while read i; do echo \"$i,0,0.5\"; done", &[5, 6, 7])
            .unwrap();
        assert_eq!(got, vec![(5, false, 0.5), (6, false, 0.5), (7, false, 0.5)]);
    }

    #[test]
    fn early_exit_reports_the_unanswered_ids() {
        let err = subprocess_oracle("read i; echo \"$i,1,1.0\"", &[4, 9, 2]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 9]"), "{msg}");
    }

    #[test]
    fn unsolicited_ids_are_rejected() {
        let err = subprocess_oracle("while read i; do echo \"$((i+100)),1,1.0\"; done", &[1])
            .unwrap_err();
        assert!(err.to_string().contains("never requested"));
    }

    #[test]
    fn double_answers_are_rejected() {
        let err = subprocess_oracle(
            "while read i; do echo \"$i,1,1.0\"; echo \"$i,1,1.0\"; done",
            &[1, 2],
        )
        .unwrap_err();
        assert!(err.to_string().contains("twice"));
    }

    #[test]
    fn incremental_fetch_interleaves_with_the_child() {
        let mut oracle =
            SubprocessOracle::spawn("while read i; do echo \"$i,1,$i.5\"; done").unwrap();
        assert_eq!(oracle.fetch(10).unwrap(), (true, 10.5));
        assert_eq!(oracle.fetch(3).unwrap(), (true, 3.5));
    }

    #[test]
    fn missing_command_is_a_protocol_error() {
        let mut oracle = SubprocessOracle::spawn("exec ./no-such-binary-here 2>/dev/null").unwrap();
        let err = oracle.fetch(1).unwrap_err();
        assert!(err.to_string().contains("exited before answering"));
    }
}
