//! Shapes the engine's query report into the documented JSON document.

use abae_core::{QueryReport, RngSeed};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct CiPart {
    pub low: f64,
    pub high: f64,
    pub alpha: f64,
}

#[derive(Debug, Serialize)]
pub struct StratumPart {
    pub p_hat: f64,
    pub mu_hat: f64,
    pub sigma_hat: f64,
    /// Predicate matches among the stage-1 draws.
    pub b1: u64,
    /// Predicate matches among the fresh stage-2 draws.
    pub b2: u64,
    /// Stage-2 allocation share.
    pub t_hat: f64,
    /// Fresh records actually drawn in stage 2.
    pub draws: u64,
}

#[derive(Debug, Serialize)]
pub struct BudgetPart {
    pub n1: u64,
    pub n2: u64,
    pub k: u64,
    pub spent: u64,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub estimate: f64,
    pub ci: CiPart,
    pub strata: Vec<StratumPart>,
    pub budget: BudgetPart,
    pub seed: RngSeed,
    pub warnings: Vec<String>,
}

/// `reuse` must match the run's parameters: with pooled stages the final
/// per-stratum counters include stage 1 and the stage-2 share is recovered
/// by subtraction.
pub fn shape(
    report: &QueryReport,
    n1: u64,
    n2: u64,
    reuse: bool,
    mut warnings: Vec<String>,
) -> RunReport {
    let ci = report.ci.as_ref().expect("queries always request an interval");
    let k = report.final_estimates.k();
    let strata = (0..k)
        .map(|s| {
            let fin = &report.final_estimates;
            let (b2, draws) = if n2 == 0 {
                (0, 0)
            } else if reuse {
                (
                    fin.b[s] - report.stage1.b[s],
                    fin.drawn[s] - report.stage1.drawn[s],
                )
            } else {
                (fin.b[s], fin.drawn[s])
            };
            StratumPart {
                p_hat: fin.p_hat[s],
                mu_hat: fin.mu_hat[s],
                sigma_hat: fin.sigma_hat[s],
                b1: report.stage1.b[s],
                b2,
                t_hat: report.allocation.t[s],
                draws,
            }
        })
        .collect();
    warnings.extend(report.warnings.iter().cloned());
    RunReport {
        estimate: report.mu_all_hat,
        ci: CiPart {
            low: ci.low,
            high: ci.high,
            alpha: ci.alpha,
        },
        strata,
        budget: BudgetPart {
            n1,
            n2,
            k: k as u64,
            spent: report.spent,
        },
        seed: report.seed,
        warnings,
    }
}
