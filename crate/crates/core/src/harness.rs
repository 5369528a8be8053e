//! Monte Carlo experiment harness: repeated-query MSE sweeps across budgets
//! and estimator variants on a synthetic dataset, log-log convergence-rate
//! fits, and interval-coverage measurement.
//!
//! Trials are paired: trial `i` at budget `j` uses the same derived seed for
//! every estimator, so estimator comparisons difference out shared sampling
//! noise (the stage-1 draws are literally identical across variants that
//! only differ in stage-2 allocation).
//!
//! Trials run in parallel. Each carries its own derived seed and the merge
//! is an ordered fold, so results do not depend on the thread count.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{kahan_sum, mse_upper_bound, optimal_allocation, Allocation, TruePopulation};
use crate::bootstrap::BootstrapConfig;
use crate::data::{Dataset, InlineOracle};
use crate::error::AbaeError;
use crate::rng::RngSeed;
use crate::sampler::{run_abae_inner, AbaeParams};
use crate::stratify::{stratify, Strata};
use crate::synthgen::{generate, measure_population, SyntheticSpec};

/// The estimator variants the harness can race against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Two-stage sampler, stage-2 statistics only.
    Abae,
    /// Two-stage sampler pooling both stages.
    AbaeReuse,
    /// Stage 2 split evenly across strata.
    UniformAllocation,
    /// Stage 2 split by the true optimal shares (needs ground truth).
    OracleOptimal,
    /// Draws matched values directly at the optimal per-stratum counts,
    /// conditioned on the true rates; no dataset, no stage 1.
    OracleConditioned,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Abae,
        EstimatorKind::AbaeReuse,
        EstimatorKind::UniformAllocation,
        EstimatorKind::OracleOptimal,
        EstimatorKind::OracleConditioned,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Abae => "abae",
            EstimatorKind::AbaeReuse => "abae-reuse",
            EstimatorKind::UniformAllocation => "uniform-allocation",
            EstimatorKind::OracleOptimal => "oracle-optimal",
            EstimatorKind::OracleConditioned => "oracle-conditioned",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

/// A full experiment: one synthetic population, a list of `(n1, n2)`
/// budgets, and the estimators to run at each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub spec: SyntheticSpec,
    pub budgets: Vec<(u64, u64)>,
    pub trials: u64,
    pub estimators: Vec<EstimatorKind>,
    pub seed: RngSeed,
}

impl ExperimentPlan {
    /// Checks the plan and returns advisory warnings. A stage-2 budget below
    /// `n1^(3/4)` starves the reallocation the method exists for; that is
    /// legal but worth flagging.
    pub fn validate(&self) -> Result<Vec<String>, AbaeError> {
        self.spec.validate()?;
        if self.budgets.is_empty() {
            return Err(AbaeError::InvalidSpec("no budgets".into()));
        }
        if self.trials == 0 {
            return Err(AbaeError::InvalidSpec("trials must be positive".into()));
        }
        if self.estimators.is_empty() {
            return Err(AbaeError::InvalidSpec("no estimators".into()));
        }
        let mut warnings = Vec::new();
        for &(n1, n2) in &self.budgets {
            if n1 == 0 {
                return Err(AbaeError::InvalidSpec("n1 must be positive".into()));
            }
            if (n2 as f64) < (n1 as f64).powf(0.75) {
                warnings.push(format!(
                    "budget ({n1}, {n2}): n2 is below n1^(3/4), stage 2 is starved"
                ));
            }
        }
        Ok(warnings)
    }
}

/// MSE of one estimator at one budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub estimator: EstimatorKind,
    pub n1: u64,
    pub n2: u64,
    /// Total oracle budget `k * n1 + n2`.
    pub n_total: u64,
    pub trials: u64,
    /// Trials that produced no estimate (no positive samples anywhere);
    /// excluded from the MSE, never silently averaged.
    pub failed: u64,
    pub mse: f64,
    /// Standard error of the MSE estimate.
    pub se: f64,
    pub mean_spent: f64,
    /// Closed-form MSE at the optimal allocation for this budget.
    pub e_star: f64,
    /// Ground-truth mean the squared errors are measured against.
    pub target: f64,
    #[serde(skip)]
    pub sq_errors: Vec<f64>,
}

/// Budget axis for a convergence-rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateAxis {
    N1,
    N2,
    NTotal,
}

/// Least-squares slope of `ln mse` against `ln budget`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub estimator: EstimatorKind,
    pub axis: RateAxis,
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// Realized ground truth of the generated dataset.
    pub mu_all: f64,
    pub cells: Vec<CellResult>,
    /// Automatic total-budget fits, one per estimator with enough cells.
    pub rate_fits: Vec<RateFit>,
    pub warnings: Vec<String>,
}

/// Interval coverage at one budget.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n1: u64,
    pub n2: u64,
    pub trials: u64,
    pub covered: u64,
    pub coverage: f64,
    /// Binomial standard error `sqrt(c (1 - c) / trials)`.
    pub se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageResult {
    pub mu_all: f64,
    pub alpha: f64,
    pub rows: Vec<CoverageRow>,
    pub warnings: Vec<String>,
}

/// A uniformly distributed point on the probability simplex (normalized
/// exponentials).
pub fn uniform_simplex(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(k > 0, "simplex needs at least one coordinate");
    let mut draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / k as f64; k];
    }
    for d in &mut draws {
        *d /= total;
    }
    draws
}

fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = kahan_sum(values.iter().copied()) / n as f64;
    let ss = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
}

fn oracle_conditioned_trial(
    spec: &SyntheticSpec,
    pop: &TruePopulation,
    optimal: &Allocation,
    n_total: u64,
    seed: RngSeed,
) -> f64 {
    let mut rng = seed.rng();
    let mut mu_hat = 0.0;
    for s in 0..pop.k() {
        let b = (pop.p[s] * optimal.t[s] * n_total as f64).ceil() as u64;
        let mean = if b == 0 {
            pop.mu[s] // a zero-count stratum contributes its exact mean
        } else {
            let mut sum = 0.0;
            for _ in 0..b {
                sum += spec.value_law.draw(&mut rng, pop.mu[s], pop.sigma[s]);
            }
            sum / b as f64
        };
        mu_hat += pop.w[s] * mean;
    }
    mu_hat
}

struct CellContext<'a> {
    plan: &'a ExperimentPlan,
    dataset: &'a Dataset,
    strata: &'a Strata,
    realized: &'a TruePopulation,
    param_pop: &'a TruePopulation,
    opt_realized: &'a Allocation,
    opt_param: &'a Allocation,
    uniform: &'a Allocation,
}

fn run_cell(
    ctx: &CellContext,
    estimator: EstimatorKind,
    budget_idx: usize,
    n1: u64,
    n2: u64,
) -> Result<CellResult, AbaeError> {
    let k = ctx.plan.spec.k();
    let n_total = k as u64 * n1 + n2;
    // the conditioned oracle answers for the generative parameters; the
    // dataset-backed estimators answer for the realized dataset
    let truth = match estimator {
        EstimatorKind::OracleConditioned => ctx.param_pop,
        _ => ctx.realized,
    };
    // trials are independent given their derived seeds, so they run in
    // parallel; the fold below walks them in trial order, which keeps sums
    // and error propagation identical to a sequential run
    let outcomes: Vec<Result<(f64, u64), AbaeError>> = (0..ctx.plan.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = ctx.plan.seed.child(1000 + budget_idx as u64).child(trial);
            match estimator {
                EstimatorKind::OracleConditioned => Ok((
                    oracle_conditioned_trial(&ctx.plan.spec, truth, ctx.opt_param, n_total, seed),
                    n_total,
                )),
                _ => {
                    let params = AbaeParams {
                        k,
                        n1,
                        n2,
                        reuse: estimator == EstimatorKind::AbaeReuse,
                        bootstrap: None,
                        c_mu: 0.0,
                    };
                    let alloc_override = match estimator {
                        EstimatorKind::UniformAllocation => Some(ctx.uniform),
                        EstimatorKind::OracleOptimal => Some(ctx.opt_realized),
                        _ => None,
                    };
                    run_abae_inner(
                        ctx.strata,
                        ctx.dataset,
                        &params,
                        seed,
                        &mut InlineOracle,
                        alloc_override,
                    )
                    .map(|r| (r.mu_all_hat, r.spent))
                }
            }
        })
        .collect();
    let mut sq_errors = Vec::with_capacity(ctx.plan.trials as usize);
    let mut failed = 0u64;
    let mut spent_total = 0u64;
    for outcome in outcomes {
        match outcome {
            Ok((estimate, spent)) => {
                let err = estimate - truth.mu_all;
                sq_errors.push(err * err);
                spent_total += spent;
            }
            Err(AbaeError::NoPositiveSamples) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    let successes = sq_errors.len();
    let mse = if successes > 0 {
        kahan_sum(sq_errors.iter().copied()) / successes as f64
    } else {
        f64::NAN
    };
    Ok(CellResult {
        estimator,
        n1,
        n2,
        n_total,
        trials: ctx.plan.trials,
        failed,
        mse,
        se: standard_error(&sq_errors),
        mean_spent: if successes > 0 {
            spent_total as f64 / successes as f64
        } else {
            f64::NAN
        },
        e_star: mse_upper_bound(truth, n_total),
        target: truth.mu_all,
        sq_errors,
    })
}

/// Generates the dataset once, runs every estimator at every budget, and
/// fits a total-budget convergence rate per estimator where the budget grid
/// supports one.
pub fn run_mse(plan: &ExperimentPlan) -> Result<ExperimentResult, AbaeError> {
    let warnings = plan.validate()?;
    let (dataset, realized) = generate(&plan.spec)?;
    let strata = stratify(&dataset, plan.spec.k())?;
    let param_pop = plan.spec.param_population()?;
    let opt_realized = optimal_allocation(&realized);
    let opt_param = optimal_allocation(&param_pop);
    let uniform = Allocation {
        t: vec![1.0 / plan.spec.k() as f64; plan.spec.k()],
        degenerate: false,
    };
    let ctx = CellContext {
        plan,
        dataset: &dataset,
        strata: &strata,
        realized: &realized,
        param_pop: &param_pop,
        opt_realized: &opt_realized,
        opt_param: &opt_param,
        uniform: &uniform,
    };

    let mut cells = Vec::new();
    for (budget_idx, &(n1, n2)) in plan.budgets.iter().enumerate() {
        for &estimator in &plan.estimators {
            cells.push(run_cell(&ctx, estimator, budget_idx, n1, n2)?);
        }
    }

    let mut rate_fits = Vec::new();
    for &estimator in &plan.estimators {
        if rate_fits
            .iter()
            .any(|f: &RateFit| f.estimator == estimator)
        {
            continue;
        }
        if let Ok(fit) = fit_rate_cells(&cells, estimator, RateAxis::NTotal) {
            rate_fits.push(fit);
        }
    }

    Ok(ExperimentResult {
        mu_all: realized.mu_all,
        cells,
        rate_fits,
        warnings,
    })
}

fn fit_rate_cells(
    cells: &[CellResult],
    estimator: EstimatorKind,
    axis: RateAxis,
) -> Result<RateFit, AbaeError> {
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.estimator == estimator && c.mse.is_finite() && c.mse > 0.0)
        .filter_map(|c| {
            let x = match axis {
                RateAxis::N1 => c.n1,
                RateAxis::N2 => c.n2,
                RateAxis::NTotal => c.n_total,
            } as f64;
            (x > 0.0).then(|| (x, c.mse))
        })
        .collect();
    let points = pts.len();
    let span = match points {
        0 => 0.0,
        _ => {
            let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.0).fold(0.0f64, f64::max);
            hi / lo
        }
    };
    if points < 4 || span < 8.0 {
        return Err(AbaeError::InsufficientPoints { points, span });
    }
    let n = points as f64;
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let xbar = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = logs
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let stderr = if points > 2 {
        (ss_res / (points - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        estimator,
        axis,
        slope,
        stderr,
    })
}

/// Fits `ln mse ~ slope * ln budget` over this estimator's cells. Needs at
/// least 4 usable cells whose budgets span a factor of 8.
pub fn fit_rate(
    result: &ExperimentResult,
    estimator: EstimatorKind,
    axis: RateAxis,
) -> Result<RateFit, AbaeError> {
    fit_rate_cells(&result.cells, estimator, axis)
}

/// Fraction of trials whose bootstrap interval covers the realized mean,
/// per budget. Uses the first planned estimator, which must be one of the
/// two-stage variants; a trial with no estimate has no interval and counts
/// as uncovered.
pub fn run_coverage(
    plan: &ExperimentPlan,
    cfg: &BootstrapConfig,
) -> Result<CoverageResult, AbaeError> {
    let warnings = plan.validate()?;
    cfg.validate()?;
    if plan.trials < 300 {
        return Err(AbaeError::InvalidSpec(format!(
            "coverage needs at least 300 trials, got {}",
            plan.trials
        )));
    }
    let reuse = match plan.estimators[0] {
        EstimatorKind::Abae => false,
        EstimatorKind::AbaeReuse => true,
        other => {
            return Err(AbaeError::InvalidSpec(format!(
                "coverage is defined for the two-stage estimators, not {}",
                other.name()
            )))
        }
    };
    let (dataset, realized) = generate(&plan.spec)?;
    let strata = stratify(&dataset, plan.spec.k())?;
    let c_mu = (0..realized.k())
        .map(|s| plan.spec.value_law.c_mu(realized.mu[s], realized.sigma[s]))
        .fold(0.0f64, f64::max);

    let mut rows = Vec::new();
    for (budget_idx, &(n1, n2)) in plan.budgets.iter().enumerate() {
        let params = AbaeParams {
            k: plan.spec.k(),
            n1,
            n2,
            reuse,
            bootstrap: Some(cfg.clone()),
            c_mu,
        };
        let outcomes: Vec<Result<bool, AbaeError>> = (0..plan.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = plan.seed.child(1000 + budget_idx as u64).child(trial);
                match run_abae_inner(&strata, &dataset, &params, seed, &mut InlineOracle, None) {
                    Ok(report) => {
                        let ci = report.ci.expect("bootstrap was requested");
                        Ok(ci.low <= realized.mu_all && realized.mu_all <= ci.high)
                    }
                    // a trial with no matched records produces no interval
                    Err(AbaeError::NoPositiveSamples) => Ok(false),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut covered = 0u64;
        for outcome in outcomes {
            if outcome? {
                covered += 1;
            }
        }
        let coverage = covered as f64 / plan.trials as f64;
        rows.push(CoverageRow {
            n1,
            n2,
            trials: plan.trials,
            covered,
            coverage,
            se: (coverage * (1.0 - coverage) / plan.trials as f64).sqrt(),
        });
    }
    Ok(CoverageResult {
        mu_all: realized.mu_all,
        alpha: cfg.alpha,
        rows,
        warnings,
    })
}

/// Full-enumeration answer on a labeled dataset, computed with the same
/// partition and combining arithmetic as the sampler.
pub fn exhaustive_mu_all(dataset: &Dataset, k: usize) -> Result<f64, AbaeError> {
    Ok(measure_population(dataset, k)?.mu_all)
}

/// Mean and standard error of the per-trial squared-error difference
/// `a - b` between two cells from the same paired run. Negative mean with
/// a clear margin means `a` won.
pub fn paired_mse_gap(a: &CellResult, b: &CellResult) -> Result<(f64, f64), AbaeError> {
    if a.failed != 0 || b.failed != 0 {
        return Err(AbaeError::InvalidSpec(
            "paired comparison needs every trial of both cells to succeed".into(),
        ));
    }
    if a.sq_errors.len() != b.sq_errors.len() || a.sq_errors.is_empty() {
        return Err(AbaeError::InvalidSpec(
            "paired comparison needs matching non-empty trial lists".into(),
        ));
    }
    let diffs: Vec<f64> = a
        .sq_errors
        .iter()
        .zip(&b.sq_errors)
        .map(|(x, y)| x - y)
        .collect();
    let mean = kahan_sum(diffs.iter().copied()) / diffs.len() as f64;
    Ok((mean, standard_error(&diffs)))
}

pub fn mse_table_csv(result: &ExperimentResult) -> String {
    let mut out =
        String::from("estimator,n1,n2,n_total,trials,failed,mse,se,mean_spent,e_star\n");
    for c in &result.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.estimator.name(),
            c.n1,
            c.n2,
            c.n_total,
            c.trials,
            c.failed,
            c.mse,
            c.se,
            c.mean_spent,
            c.e_star
        ));
    }
    out
}

pub fn coverage_table_csv(result: &CoverageResult) -> String {
    let mut out = String::from("n1,n2,trials,covered,coverage,se\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n1, r.n2, r.trials, r.covered, r.coverage, r.se
        ));
    }
    out
}
