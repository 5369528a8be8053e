use std::collections::HashMap;

use crate::error::AbaeError;

/// One row of the input relation.
///
/// `proxy` is the cheap score used for stratification. The expensive
/// predicate outcome and the aggregated value stay hidden behind
/// [`BudgetLedger`]: engine code only learns them through a charged reveal.
/// `truth` is `None` when labels live in an external oracle process.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    id: u64,
    proxy: f64,
    truth: Option<(bool, f64)>,
}

impl Record {
    pub fn new(id: u64, proxy: f64, truth: Option<(bool, f64)>) -> Self {
        Self { id, proxy, truth }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn proxy(&self) -> f64 {
        self.proxy
    }

    /// Raw label access for serialization and generator tooling. Query-path
    /// code must go through [`BudgetLedger::charge_and_reveal`] instead so
    /// that every evaluation is accounted for.
    pub fn raw_truth(&self) -> Option<(bool, f64)> {
        self.truth
    }
}

/// An immutable collection of records with unique ids.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<Record>,
    by_id: HashMap<u64, usize>,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Result<Self, AbaeError> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (idx, r) in records.iter().enumerate() {
            if by_id.insert(r.id, idx).is_some() {
                return Err(AbaeError::DuplicateId { id: r.id });
            }
        }
        Ok(Self { records, by_id })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&Record> {
        self.by_id.get(&id).map(|&i| &self.records[i])
    }
}

/// Supplies the predicate outcome and value for a record on demand.
///
/// The inline implementation reads labels embedded in the dataset; the CLI
/// adds one backed by an external process.
pub trait RecordOracle {
    fn reveal(&mut self, record: &Record) -> Result<(bool, f64), AbaeError>;
}

/// Oracle for datasets that carry their labels inline.
#[derive(Debug, Default, Clone, Copy)]
pub struct InlineOracle;

impl RecordOracle for InlineOracle {
    fn reveal(&mut self, record: &Record) -> Result<(bool, f64), AbaeError> {
        record
            .raw_truth()
            .ok_or(AbaeError::MissingTruth { id: record.id })
    }
}

/// Tracks predicate evaluations against a hard cap.
///
/// The cap is `k * n1 + n2 + k`: the two stage budgets plus one extra draw
/// per stratum, because stage-2 counts are rounded up per stratum. The first
/// reveal of a record costs one unit; later reveals of the same record hit
/// the cache and are free.
#[derive(Debug, Clone)]
pub struct BudgetLedger {
    k: u64,
    n1: u64,
    n2: u64,
    spent: u64,
    revealed: HashMap<u64, (bool, f64)>,
}

impl BudgetLedger {
    pub fn new(k: u64, n1: u64, n2: u64) -> Self {
        Self {
            k,
            n1,
            n2,
            spent: 0,
            revealed: HashMap::new(),
        }
    }

    pub fn cap(&self) -> u64 {
        self.k * self.n1 + self.n2 + self.k
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn remaining(&self) -> u64 {
        self.cap() - self.spent
    }

    pub fn is_revealed(&self, id: u64) -> bool {
        self.revealed.contains_key(&id)
    }

    /// Reveals a record's label through `oracle`, charging the budget on the
    /// first access only.
    pub fn charge_and_reveal_via(
        &mut self,
        record: &Record,
        oracle: &mut dyn RecordOracle,
    ) -> Result<(bool, f64), AbaeError> {
        if let Some(&cached) = self.revealed.get(&record.id()) {
            return Ok(cached);
        }
        if self.spent >= self.cap() {
            return Err(AbaeError::BudgetExhausted {
                spent: self.spent,
                cap: self.cap(),
            });
        }
        let truth = oracle.reveal(record)?;
        self.spent += 1;
        self.revealed.insert(record.id(), truth);
        Ok(truth)
    }

    /// Shorthand for datasets with inline labels.
    pub fn charge_and_reveal(&mut self, record: &Record) -> Result<(bool, f64), AbaeError> {
        self.charge_and_reveal_via(record, &mut InlineOracle)
    }
}
