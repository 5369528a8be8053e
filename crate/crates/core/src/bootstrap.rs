use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::AbaeError;
use crate::rng::RngSeed;
use crate::sampler::{estimate_mu_all, SampleStore, StratumEstimates};

/// Percentile-bootstrap settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: u32,
    pub alpha: f64,
    /// Strata with fewer matched samples than this count the interval as
    /// unreliable and trigger the widening in [`adjust_ci`].
    pub min_stratum_samples: u64,
    pub adjustment: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            alpha: 0.05,
            min_stratum_samples: 30,
            adjustment: false,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), AbaeError> {
        if self.resamples < 100 {
            return Err(AbaeError::InvalidSpec(
                "a reported interval needs at least 100 resamples".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AbaeError::InvalidSpec(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Two-sided interval at level `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub alpha: f64,
}

/// Linear-interpolation quantile of an ascending slice: index `q * (m - 1)`
/// split between the neighboring order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level outside [0, 1]");
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
}

/// Percentile bootstrap for the combined estimate.
///
/// Each resample redraws every stratum's pairs with replacement at the
/// original count and recomputes the estimate. When the store pooled both
/// stages, the pooled pairs are resampled as one sample per stratum;
/// otherwise the stage-1 pairs drive the resampled rate and the stage-2
/// pairs the resampled mean, mirroring how the point estimate was formed.
/// Resamples in which no stratum matches are dropped (and reported via
/// `warnings`); the interval is clamped to contain the point estimate.
pub fn bootstrap_ci(
    store: &SampleStore,
    estimates: &StratumEstimates,
    cfg: &BootstrapConfig,
    seed: RngSeed,
    warnings: &mut Vec<String>,
) -> Result<ConfidenceInterval, AbaeError> {
    cfg.validate()?;
    let point = estimate_mu_all(estimates)?;
    let k = store.strata.len();

    // per stratum: the pools to resample (rate pool, mean pool)
    let pooled: Vec<Vec<(bool, f64)>> = if store.reuse {
        store
            .strata
            .iter()
            .map(|s| s.stage1.iter().chain(&s.stage2).copied().collect())
            .collect()
    } else {
        Vec::new()
    };

    let mut rng = seed.rng();
    let mut stats = Vec::with_capacity(cfg.resamples as usize);
    let mut dropped = 0u32;
    for _ in 0..cfg.resamples {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for s in 0..k {
            let (p_star, mu_star) = if store.reuse {
                let pool = &pooled[s];
                resample_rate_and_mean(pool, pool, &mut rng)
            } else {
                resample_rate_and_mean(
                    &store.strata[s].stage1,
                    &store.strata[s].stage2,
                    &mut rng,
                )
            };
            num += p_star * mu_star;
            den += p_star;
        }
        if den > 0.0 {
            stats.push(num / den);
        } else {
            dropped += 1;
        }
    }

    if dropped > 0 {
        warnings.push(format!(
            "{dropped} of {} bootstrap resamples matched nothing and were dropped",
            cfg.resamples
        ));
    }
    if stats.is_empty() {
        warnings.push("no usable bootstrap resamples; interval collapsed to the point".into());
        return Ok(ConfidenceInterval {
            low: point,
            high: point,
            alpha: cfg.alpha,
        });
    }

    stats.sort_by(f64::total_cmp);
    let low = quantile(&stats, cfg.alpha / 2.0);
    let high = quantile(&stats, 1.0 - cfg.alpha / 2.0);
    Ok(ConfidenceInterval {
        low: low.min(point),
        high: high.max(point),
        alpha: cfg.alpha,
    })
}

/// One with-replacement redraw: the rate comes from `rate_pool` at its own
/// size, the matched mean from `mean_pool` at its own size.
fn resample_rate_and_mean(
    rate_pool: &[(bool, f64)],
    mean_pool: &[(bool, f64)],
    rng: &mut impl Rng,
) -> (f64, f64) {
    let same = std::ptr::eq(rate_pool, mean_pool);
    let mut matched = 0u64;
    let mut sum = 0.0f64;
    let p_star = if rate_pool.is_empty() {
        0.0
    } else {
        let m = rate_pool.len();
        for _ in 0..m {
            let (hit, value) = rate_pool[rng.random_range(0..m)];
            if hit {
                matched += 1;
                sum += value;
            }
        }
        matched as f64 / m as f64
    };
    if same {
        let mu = if matched > 0 { sum / matched as f64 } else { 0.0 };
        return (p_star, mu);
    }
    let mut b = 0u64;
    let mut vsum = 0.0f64;
    if !mean_pool.is_empty() {
        let m = mean_pool.len();
        for _ in 0..m {
            let (hit, value) = mean_pool[rng.random_range(0..m)];
            if hit {
                b += 1;
                vsum += value;
            }
        }
    }
    let mu_star = if b > 0 { vsum / b as f64 } else { 0.0 };
    (p_star, mu_star)
}

/// Widens an interval for small matched counts: each stratum with fewer than
/// `cfg.min_stratum_samples` matches adds `p_hat * c_mu` of symmetric slack.
pub fn adjust_ci(
    ci: ConfidenceInterval,
    estimates: &StratumEstimates,
    cfg: &BootstrapConfig,
    c_mu: f64,
) -> ConfidenceInterval {
    let pad: f64 = (0..estimates.k())
        .filter(|&k| estimates.b[k] < cfg.min_stratum_samples)
        .map(|k| estimates.p_hat[k] * c_mu)
        .sum();
    ConfidenceInterval {
        low: ci.low - pad,
        high: ci.high + pad,
        alpha: ci.alpha,
    }
}
