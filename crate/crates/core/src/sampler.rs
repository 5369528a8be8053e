use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::{empirical_allocation, Allocation, AllocationPlan};
use crate::bootstrap::{adjust_ci, bootstrap_ci, BootstrapConfig, ConfidenceInterval};
use crate::data::{BudgetLedger, Dataset, InlineOracle, RecordOracle};
use crate::error::AbaeError;
use crate::rng::RngSeed;
use crate::stratify::{stratify, Strata};

/// Per-stratum sample statistics: positive rate `p_hat`, matched-value mean
/// `mu_hat` and sample standard deviation `sigma_hat`, matched count `b`, and
/// the number of draws `drawn` that inform `p_hat`'s denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumEstimates {
    pub p_hat: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub b: Vec<u64>,
    pub drawn: Vec<u64>,
}

impl StratumEstimates {
    fn with_capacity(k: usize) -> Self {
        Self {
            p_hat: Vec::with_capacity(k),
            mu_hat: Vec::with_capacity(k),
            sigma_hat: Vec::with_capacity(k),
            b: Vec::with_capacity(k),
            drawn: Vec::with_capacity(k),
        }
    }

    pub fn k(&self) -> usize {
        self.p_hat.len()
    }
}

/// The labeled draws of one stratum, split by stage. Within each stage the
/// pairs are ordered by position in the proxy-sorted stratum, so estimates
/// depend only on which records were drawn.
#[derive(Debug, Clone, Default)]
pub struct StratumDraws {
    pub stage1: Vec<(bool, f64)>,
    pub stage2: Vec<(bool, f64)>,
    pub(crate) taken: HashSet<usize>,
}

/// All draws of a query, kept for the bootstrap.
#[derive(Debug, Clone)]
pub struct SampleStore {
    pub strata: Vec<StratumDraws>,
    /// Whether the final estimates pooled both stages.
    pub(crate) reuse: bool,
}

/// Knobs for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbaeParams {
    pub k: usize,
    /// Stage-1 draws per stratum.
    pub n1: u64,
    /// Stage-2 draws shared across strata by the allocation.
    pub n2: u64,
    /// Fold the stage-1 draws into the final estimates.
    pub reuse: bool,
    /// Bootstrap settings; `None` skips the confidence interval.
    pub bootstrap: Option<BootstrapConfig>,
    /// Bound on |value| used by the small-sample CI widening; only read when
    /// the bootstrap config enables `adjustment`.
    pub c_mu: f64,
}

impl AbaeParams {
    pub fn new(k: usize, n1: u64, n2: u64) -> Self {
        Self {
            k,
            n1,
            n2,
            reuse: false,
            bootstrap: None,
            c_mu: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), AbaeError> {
        if self.k == 0 {
            return Err(AbaeError::InvalidSpec("stratum count must be >= 1".into()));
        }
        if self.n1 == 0 {
            return Err(AbaeError::InvalidSpec(
                "stage-1 budget must be >= 1 draw per stratum".into(),
            ));
        }
        if let Some(cfg) = &self.bootstrap {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Everything a query run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    /// The estimate of the mean over predicate-matching records.
    pub mu_all_hat: f64,
    pub ci: Option<ConfidenceInterval>,
    pub stage1: StratumEstimates,
    pub final_estimates: StratumEstimates,
    pub allocation: AllocationPlan,
    /// Predicate evaluations actually charged.
    pub spent: u64,
    pub seed: RngSeed,
    pub warnings: Vec<String>,
}

/// Draws `want` distinct positions in `0..len` that are not yet in `taken`,
/// recording them in `taken`. Positions come back sorted so downstream
/// statistics do not depend on draw order.
fn sample_distinct(
    rng: &mut ChaCha8Rng,
    len: usize,
    want: usize,
    taken: &mut HashSet<usize>,
) -> Vec<usize> {
    let remaining = len - taken.len();
    debug_assert!(want <= remaining);
    let mut out = Vec::with_capacity(want);
    if want == 0 {
        return out;
    }
    if want * 2 <= remaining {
        // rejection sampling stays cheap while the pool is mostly untouched
        while out.len() < want {
            let pos = rng.random_range(0..len);
            if taken.insert(pos) {
                out.push(pos);
            }
        }
    } else {
        // dense request: materialize what's left and take a partial shuffle
        let mut pool: Vec<usize> = (0..len).filter(|p| !taken.contains(p)).collect();
        for i in 0..want {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
            let pos = pool[i];
            taken.insert(pos);
            out.push(pos);
        }
    }
    out.sort_unstable();
    out
}

/// Matched count, mean, and sample standard deviation of the matching pairs.
/// An empty match set yields `(0, 0.0, 0.0)`; a singleton has deviation 0.
pub(crate) fn matched_stats(pairs: &[(bool, f64)]) -> (u64, f64, f64) {
    let matched: Vec<f64> = pairs.iter().filter(|p| p.0).map(|p| p.1).collect();
    let b = matched.len() as u64;
    if b == 0 {
        return (0, 0.0, 0.0);
    }
    let mean = crate::allocation::kahan_sum(matched.iter().copied()) / b as f64;
    if b < 2 {
        return (b, mean, 0.0);
    }
    let ss = crate::allocation::kahan_sum(matched.iter().map(|x| (x - mean) * (x - mean)));
    (b, mean, (ss / (b - 1) as f64).sqrt())
}

fn reveal_positions(
    group: &[u64],
    positions: &[usize],
    dataset: &Dataset,
    ledger: &mut BudgetLedger,
    oracle: &mut dyn RecordOracle,
) -> Result<Vec<(bool, f64)>, AbaeError> {
    let mut pairs = Vec::with_capacity(positions.len());
    for &pos in positions {
        let record = dataset
            .get(group[pos])
            .expect("strata reference records of this dataset");
        pairs.push(ledger.charge_and_reveal_via(record, oracle)?);
    }
    Ok(pairs)
}

/// Stage 1: `n1` uniform draws per stratum (clamped to the stratum size) to
/// estimate each stratum's rate, mean, and spread.
pub fn stage1(
    strata: &Strata,
    dataset: &Dataset,
    n1: u64,
    ledger: &mut BudgetLedger,
    oracle: &mut dyn RecordOracle,
    seed: RngSeed,
    warnings: &mut Vec<String>,
) -> Result<(StratumEstimates, SampleStore), AbaeError> {
    let mut rng = seed.rng();
    let mut est = StratumEstimates::with_capacity(strata.k());
    let mut store = SampleStore {
        strata: Vec::with_capacity(strata.k()),
        reuse: false,
    };
    for (k, group) in strata.groups().iter().enumerate() {
        let want = (n1 as usize).min(group.len());
        if want < n1 as usize {
            warnings.push(format!(
                "stratum {k} has {} records, fewer than the stage-1 budget {n1}; drew them all",
                group.len()
            ));
        }
        let mut draws = StratumDraws::default();
        let positions = sample_distinct(&mut rng, group.len(), want, &mut draws.taken);
        draws.stage1 = reveal_positions(group, &positions, dataset, ledger, oracle)?;
        let (b, mu, sigma) = matched_stats(&draws.stage1);
        est.p_hat.push(b as f64 / want as f64);
        est.mu_hat.push(mu);
        est.sigma_hat.push(sigma);
        est.b.push(b);
        est.drawn.push(want as u64);
        store.strata.push(draws);
    }
    Ok((est, store))
}

/// Stage 2: draws each stratum's allocated share, never repeating a stage-1
/// record, and forms the final estimates.
///
/// With `reuse` the two stages pool into one sample per stratum: the rate,
/// mean, and spread all come from the union. Without it the stage-1 rate is
/// carried forward unchanged and the mean and spread - zero when nothing
/// matched - come from the fresh draws alone.
#[allow(clippy::too_many_arguments)]
pub fn stage2(
    strata: &Strata,
    dataset: &Dataset,
    plan: &AllocationPlan,
    stage1_est: &StratumEstimates,
    store: &mut SampleStore,
    reuse: bool,
    ledger: &mut BudgetLedger,
    oracle: &mut dyn RecordOracle,
    seed: RngSeed,
    warnings: &mut Vec<String>,
) -> Result<StratumEstimates, AbaeError> {
    assert_eq!(plan.draws.len(), strata.k(), "plan must cover every stratum");
    let mut rng = seed.rng();
    let mut est = StratumEstimates::with_capacity(strata.k());
    store.reuse = reuse;
    for (k, group) in strata.groups().iter().enumerate() {
        let draws = &mut store.strata[k];
        let remaining = group.len() - draws.taken.len();
        let want = (plan.draws[k] as usize).min(remaining);
        if want < plan.draws[k] as usize {
            warnings.push(format!(
                "stratum {k} has only {remaining} unseen records for a stage-2 allocation of {}; drew them all",
                plan.draws[k]
            ));
        }
        let positions = sample_distinct(&mut rng, group.len(), want, &mut draws.taken);
        draws.stage2 = reveal_positions(group, &positions, dataset, ledger, oracle)?;

        if reuse {
            let pooled: Vec<(bool, f64)> = draws
                .stage1
                .iter()
                .chain(&draws.stage2)
                .copied()
                .collect();
            let (b, mu, sigma) = matched_stats(&pooled);
            let drawn = stage1_est.drawn[k] + want as u64;
            est.p_hat.push(b as f64 / drawn as f64);
            est.mu_hat.push(mu);
            est.sigma_hat.push(sigma);
            est.b.push(b);
            est.drawn.push(drawn);
        } else {
            let (b, mu, sigma) = matched_stats(&draws.stage2);
            est.p_hat.push(stage1_est.p_hat[k]);
            est.mu_hat.push(mu);
            est.sigma_hat.push(sigma);
            est.b.push(b);
            est.drawn.push(want as u64);
        }
    }
    Ok(est)
}

/// Combines stratum estimates into the overall mean over matching records:
/// `sum_k p_hat_k mu_hat_k / sum_k p_hat_k`.
///
/// The accumulation order (stratum 0 upward, numerator and denominator side
/// by side) is fixed; exhaustive runs reproduce a population's `mu_all` bit
/// for bit because the generator evaluates the same expression.
pub fn estimate_mu_all(est: &StratumEstimates) -> Result<f64, AbaeError> {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for k in 0..est.k() {
        num += est.p_hat[k] * est.mu_hat[k];
        den += est.p_hat[k];
    }
    if den <= 0.0 {
        return Err(AbaeError::NoPositiveSamples);
    }
    Ok(num / den)
}

pub(crate) fn run_abae_inner(
    strata: &Strata,
    dataset: &Dataset,
    params: &AbaeParams,
    seed: RngSeed,
    oracle: &mut dyn RecordOracle,
    allocation_override: Option<&Allocation>,
) -> Result<QueryReport, AbaeError> {
    params.validate()?;
    if strata.k() != params.k {
        return Err(AbaeError::InvalidSpec(format!(
            "partition has {} strata but params ask for {}",
            strata.k(),
            params.k
        )));
    }
    let mut warnings = Vec::new();
    let mut ledger = BudgetLedger::new(params.k as u64, params.n1, params.n2);
    let (stage1_est, mut store) = stage1(
        strata,
        dataset,
        params.n1,
        &mut ledger,
        oracle,
        seed.child(1),
        &mut warnings,
    )?;
    let plan = match allocation_override {
        Some(a) => a.plan(params.n2),
        None => empirical_allocation(&stage1_est, params.n2),
    };
    if plan.degenerate {
        warnings.push(
            "stage 1 saw no variation in any stratum; stage 2 falls back to a uniform split"
                .into(),
        );
    }
    let final_estimates = if params.n2 == 0 {
        // no stage 2: the run degenerates to a one-stage estimator
        store.reuse = true;
        stage1_est.clone()
    } else {
        stage2(
            strata,
            dataset,
            &plan,
            &stage1_est,
            &mut store,
            params.reuse,
            &mut ledger,
            oracle,
            seed.child(2),
            &mut warnings,
        )?
    };
    let mu_all_hat = estimate_mu_all(&final_estimates)?;
    let ci = match &params.bootstrap {
        Some(cfg) => {
            let raw = bootstrap_ci(
                &store,
                &final_estimates,
                cfg,
                seed.child(3),
                &mut warnings,
            )?;
            Some(if cfg.adjustment {
                adjust_ci(raw, &final_estimates, cfg, params.c_mu)
            } else {
                raw
            })
        }
        None => None,
    };
    Ok(QueryReport {
        mu_all_hat,
        ci,
        stage1: stage1_est,
        final_estimates,
        allocation: plan,
        spent: ledger.spent(),
        seed,
        warnings,
    })
}

/// Runs the full two-stage query against a dataset with inline labels.
pub fn run_abae(
    dataset: &Dataset,
    params: &AbaeParams,
    seed: RngSeed,
) -> Result<QueryReport, AbaeError> {
    let strata = stratify(dataset, params.k)?;
    run_abae_inner(&strata, dataset, params, seed, &mut InlineOracle, None)
}

/// Same as [`run_abae`] but resolves labels through a caller-supplied oracle
/// (for datasets whose predicate lives in an external process).
pub fn run_abae_with_oracle(
    dataset: &Dataset,
    params: &AbaeParams,
    seed: RngSeed,
    oracle: &mut dyn RecordOracle,
) -> Result<QueryReport, AbaeError> {
    let strata = stratify(dataset, params.k)?;
    run_abae_inner(&strata, dataset, params, seed, oracle, None)
}

/// Runs a query against a prebuilt partition, skipping the sort. Useful when
/// many queries hit one dataset.
pub fn run_abae_on(
    strata: &Strata,
    dataset: &Dataset,
    params: &AbaeParams,
    seed: RngSeed,
    oracle: &mut dyn RecordOracle,
) -> Result<QueryReport, AbaeError> {
    run_abae_inner(strata, dataset, params, seed, oracle, None)
}
