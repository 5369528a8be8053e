use thiserror::Error;

/// Errors surfaced by the sampling engine and its tooling.
#[derive(Debug, Error)]
pub enum AbaeError {
    /// The predicate-evaluation budget ran out before the requested draw.
    #[error("sampling budget exhausted: spent {spent} of {cap}")]
    BudgetExhausted { spent: u64, cap: u64 },

    /// Stratum count must be at least 1 and no larger than the dataset.
    #[error("invalid stratum count {k} for dataset of {len} records")]
    InvalidK { k: usize, len: usize },

    /// Every stratum came back with a zero positive rate, so the combined
    /// estimate is 0/0. Callers should retry with a larger stage-1 budget.
    #[error("no sampled record matched the predicate in any stratum")]
    NoPositiveSamples,

    /// A record offered no inline predicate/value and no oracle was supplied.
    #[error("record {id} has no inline label and no oracle is configured")]
    MissingTruth { id: u64 },

    /// Two records share an id; the budget ledger needs ids to be unique.
    #[error("duplicate record id {id}")]
    DuplicateId { id: u64 },

    /// The variance deviation bound needs at least two matched samples.
    #[error("variance bound needs at least 2 matched samples, got {b1}")]
    InsufficientMatches { b1: u64 },

    /// A decay-rate fit needs enough spread in the budget axis to be
    /// meaningful: at least four points spanning a factor of eight.
    #[error("rate fit needs >=4 budget points spanning >=8x, got {points} spanning {span:.2}x")]
    InsufficientPoints { points: usize, span: f64 },

    /// A synthetic dataset description failed validation.
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    /// An external predicate oracle broke the line protocol.
    #[error("oracle protocol error: {0}")]
    OracleProtocol(String),
}
