use serde::{Deserialize, Serialize};

use crate::error::AbaeError;
use crate::sampler::StratumEstimates;

/// Ground-truth per-stratum parameters of a population.
///
/// `p` is the predicate-positive rate, `mu`/`sigma` the mean and standard
/// deviation of the value among matching records. `w` are the stratum
/// weights `p_k / p_all` and `mu_all` the population-level mean the sampler
/// estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruePopulation {
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub w: Vec<f64>,
    pub p_all: f64,
    pub mu_all: f64,
}

impl TruePopulation {
    /// Builds a population from per-stratum parameters; `mu_all` follows as
    /// the weighted mean.
    pub fn from_params(p: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self, AbaeError> {
        let (w, p_all) = Self::validate(&p, &mu, &sigma)?;
        let mu_all = w.iter().zip(&mu).map(|(wk, mk)| wk * mk).sum();
        Ok(Self {
            p,
            mu,
            sigma,
            w,
            p_all,
            mu_all,
        })
    }

    /// Builds a population whose `mu_all` was measured directly (for example
    /// from a full pass over a realized dataset). The supplied value must
    /// agree with the weighted stratum means up to floating-point error.
    pub fn with_mu_all(
        p: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        mu_all: f64,
    ) -> Result<Self, AbaeError> {
        let (w, p_all) = Self::validate(&p, &mu, &sigma)?;
        let weighted: f64 = w.iter().zip(&mu).map(|(wk, mk)| wk * mk).sum();
        let scale = weighted.abs().max(mu_all.abs()).max(1.0);
        if (weighted - mu_all).abs() > 1e-9 * scale {
            return Err(AbaeError::InvalidSpec(format!(
                "mu_all {mu_all} is inconsistent with weighted stratum means {weighted}"
            )));
        }
        Ok(Self {
            p,
            mu,
            sigma,
            w,
            p_all,
            mu_all,
        })
    }

    fn validate(p: &[f64], mu: &[f64], sigma: &[f64]) -> Result<(Vec<f64>, f64), AbaeError> {
        if p.is_empty() || p.len() != mu.len() || p.len() != sigma.len() {
            return Err(AbaeError::InvalidSpec(format!(
                "parameter vectors must share a nonzero length, got p={} mu={} sigma={}",
                p.len(),
                mu.len(),
                sigma.len()
            )));
        }
        for (k, &pk) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&pk) {
                return Err(AbaeError::InvalidSpec(format!(
                    "p[{k}]={pk} outside [0, 1]"
                )));
            }
        }
        for (k, &sk) in sigma.iter().enumerate() {
            if !sk.is_finite() || sk < 0.0 {
                return Err(AbaeError::InvalidSpec(format!("sigma[{k}]={sk} invalid")));
            }
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(AbaeError::InvalidSpec("non-finite stratum mean".into()));
        }
        let p_all: f64 = p.iter().sum();
        if p_all <= 0.0 {
            return Err(AbaeError::InvalidSpec(
                "every stratum has a zero positive rate".into(),
            ));
        }
        let w = p.iter().map(|pk| pk / p_all).collect();
        Ok((w, p_all))
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }
}

/// Stage-2 budget split across strata, as fractions summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub t: Vec<f64>,
    /// True when every stratum had `sqrt(p) * sigma == 0` and the split fell
    /// back to uniform.
    pub degenerate: bool,
}

impl Allocation {
    /// Rounds the fractions into integer draw counts for a stage-2 budget.
    pub fn plan(&self, n2: u64) -> AllocationPlan {
        let draws = self
            .t
            .iter()
            .map(|&tk| (n2 as f64 * tk).ceil() as u64)
            .collect();
        AllocationPlan {
            t: self.t.clone(),
            draws,
            n2,
            degenerate: self.degenerate,
        }
    }
}

/// An [`Allocation`] with the per-stratum draw counts for a concrete budget.
/// Counts are rounded up, so they can overshoot `n2` by at most one draw per
/// stratum; the ledger cap leaves room for exactly that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub t: Vec<f64>,
    pub draws: Vec<u64>,
    pub n2: u64,
    pub degenerate: bool,
}

fn shares(ps: &[f64], sigmas: &[f64]) -> Allocation {
    let root: Vec<f64> = ps
        .iter()
        .zip(sigmas)
        .map(|(&p, &s)| p.sqrt() * s)
        .collect();
    let total: f64 = root.iter().sum();
    if total <= 0.0 {
        let k = ps.len();
        return Allocation {
            t: vec![1.0 / k as f64; k],
            degenerate: true,
        };
    }
    Allocation {
        t: root.iter().map(|r| r / total).collect(),
        degenerate: false,
    }
}

/// The variance-minimizing stage-2 split: `t_k` proportional to
/// `sqrt(p_k) * sigma_k`.
pub fn optimal_allocation(pop: &TruePopulation) -> Allocation {
    shares(&pop.p, &pop.sigma)
}

/// Same rule driven by stage-1 estimates instead of ground truth.
pub fn empirical_allocation(est: &StratumEstimates, n2: u64) -> AllocationPlan {
    shares(&est.p_hat, &est.sigma_hat).plan(n2)
}

/// Expected squared error of the combined estimator when stratum `k`
/// receives a `t[k]` share of `n` samples:
/// `sum_k w_k^2 sigma_k^2 / (p_k t_k n)`.
///
/// Strata that cannot contribute error (`w_k * sigma_k == 0`) add zero even
/// with a zero share; starving any other stratum costs infinity.
pub fn loss(t: &[f64], pop: &TruePopulation, n: u64) -> f64 {
    assert_eq!(t.len(), pop.k(), "allocation length must match population");
    assert!(n > 0, "sample budget must be positive");
    let mut total = 0.0;
    for k in 0..pop.k() {
        let numer = pop.w[k] * pop.w[k] * pop.sigma[k] * pop.sigma[k];
        if numer == 0.0 {
            continue;
        }
        let denom = pop.p[k] * t[k] * n as f64;
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        total += numer / denom;
    }
    total
}

/// Value of [`loss`] at the optimal allocation:
/// `(sum_k sqrt(p_k) sigma_k)^2 / (n * p_all^2)`.
pub fn mse_upper_bound(pop: &TruePopulation, n: u64) -> f64 {
    let root_sum: f64 = pop
        .p
        .iter()
        .zip(&pop.sigma)
        .map(|(&p, &s)| p.sqrt() * s)
        .sum();
    root_sum * root_sum / (n as f64 * pop.p_all * pop.p_all)
}

/// Neumaier-compensated sum; used where stratum-level and dataset-level
/// passes over the same values must agree to near machine precision.
pub(crate) fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
