//! Two-stage stratified sampling for aggregation queries whose predicate is
//! expensive to evaluate.
//!
//! A dataset is split into strata by a cheap proxy score. Stage 1 spends a
//! uniform slice of the budget per stratum to estimate each stratum's
//! predicate-positive rate and the mean and spread of the aggregated value
//! among matching records. Stage 2 spends the remaining budget according to
//! an allocation that minimizes the variance of the combined estimate. Every
//! predicate evaluation is charged against a fixed budget ledger; repeat
//! lookups of a record are free.
//!
//! The crate also ships the supporting tooling used to study the estimator:
//! closed-form concentration bounds with Monte Carlo validators, a percentile
//! bootstrap for confidence intervals, a synthetic dataset generator, and an
//! experiment harness that measures MSE decay rates and CI coverage.

pub mod allocation;
pub mod bootstrap;
pub mod bounds;
pub mod data;
pub mod error;
pub mod harness;
pub mod rng;
pub mod sampler;
pub mod stratify;
pub mod synthgen;

pub use allocation::{
    empirical_allocation, loss, mse_upper_bound, optimal_allocation, Allocation, AllocationPlan,
    TruePopulation,
};
pub use bootstrap::{bootstrap_ci, quantile, BootstrapConfig, ConfidenceInterval};
pub use bounds::{validate_bound, BoundCheckReport, BoundKind, BoundParams, ValidationConfig};
pub use data::{BudgetLedger, Dataset, InlineOracle, Record, RecordOracle};
pub use error::AbaeError;
pub use harness::{
    exhaustive_mu_all, fit_rate, paired_mse_gap, run_coverage, run_mse, CellResult,
    CoverageResult, CoverageRow, EstimatorKind, ExperimentPlan, ExperimentResult, RateAxis,
    RateFit,
};
pub use rng::RngSeed;
pub use sampler::{
    estimate_mu_all, run_abae, run_abae_on, run_abae_with_oracle, AbaeParams, QueryReport,
    SampleStore, StratumEstimates,
};
pub use stratify::{stratify, Strata};
pub use synthgen::{generate, measure_population, StratumSpec, SyntheticSpec, ValueLaw};
