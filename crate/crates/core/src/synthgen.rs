use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::allocation::{kahan_sum, TruePopulation};
use crate::data::{Dataset, Record};
use crate::error::AbaeError;
use crate::rng::RngSeed;
use crate::sampler::{estimate_mu_all, matched_stats, StratumEstimates};
use crate::stratify::stratify;

/// Distribution of the aggregated value within a stratum.
///
/// Two-point puts equal mass on `mu - sigma` and `mu + sigma`, which pins the
/// mean and variance exactly; truncated-normal draws `N(mu, sigma)` clipped
/// to `mu +- 5 sigma`, a bounded (hence subgaussian) continuous law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueLaw {
    TwoPoint,
    TruncatedNormal,
}

impl ValueLaw {
    pub fn draw(&self, rng: &mut impl Rng, mu: f64, sigma: f64) -> f64 {
        match self {
            ValueLaw::TwoPoint => {
                if rng.random::<bool>() {
                    mu + sigma
                } else {
                    mu - sigma
                }
            }
            ValueLaw::TruncatedNormal => {
                if sigma == 0.0 {
                    return mu;
                }
                let x = Normal::new(mu, sigma).expect("finite params").sample(rng);
                x.clamp(mu - 5.0 * sigma, mu + 5.0 * sigma)
            }
        }
    }

    /// Bound on |X| for a stratum with the given parameters.
    pub fn c_mu(&self, mu: f64, sigma: f64) -> f64 {
        match self {
            ValueLaw::TwoPoint => mu.abs() + sigma,
            ValueLaw::TruncatedNormal => mu.abs() + 5.0 * sigma,
        }
    }

    /// Bound on the standard deviation (the law's own sigma works: clipping
    /// only shrinks spread).
    pub fn c_sigma(&self, sigma: f64) -> f64 {
        sigma
    }

    /// Bound used by the variance-deviation half-width: the square of the
    /// largest value the pair kernel `(x - x')^2 / 2` can take.
    pub fn c_mu4(&self, sigma: f64) -> f64 {
        let kernel_max = match self {
            // values span 2 sigma
            ValueLaw::TwoPoint => 2.0 * sigma * sigma,
            // clipped values span 10 sigma
            ValueLaw::TruncatedNormal => 50.0 * sigma * sigma,
        };
        kernel_max * kernel_max
    }
}

/// Target parameters of one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub p: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Recipe for a synthetic dataset with known per-stratum ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub strata: Vec<StratumSpec>,
    pub records_per_stratum: usize,
    pub value_law: ValueLaw,
    /// 0 keeps every record's proxy inside its stratum band; values toward 1
    /// blend in a global uniform component, blurring the stratum order.
    pub proxy_noise: f64,
    pub seed: RngSeed,
}

impl SyntheticSpec {
    pub fn k(&self) -> usize {
        self.strata.len()
    }

    /// The four-stratum population used throughout the test harness: rare-
    /// to-common predicate rates with heterogeneous spread, so the optimal
    /// allocation is far from uniform.
    pub fn default_suite() -> Self {
        Self {
            strata: vec![
                StratumSpec {
                    p: 0.01,
                    mu: 1.0,
                    sigma: 1.0,
                },
                StratumSpec {
                    p: 0.05,
                    mu: 2.0,
                    sigma: 1.0,
                },
                StratumSpec {
                    p: 0.2,
                    mu: 3.0,
                    sigma: 2.0,
                },
                StratumSpec {
                    p: 0.5,
                    mu: 4.0,
                    sigma: 2.0,
                },
            ],
            records_per_stratum: 100_000,
            value_law: ValueLaw::TwoPoint,
            proxy_noise: 0.0,
            seed: RngSeed::new(0xABAE),
        }
    }

    pub fn validate(&self) -> Result<(), AbaeError> {
        if self.strata.is_empty() {
            return Err(AbaeError::InvalidSpec("no strata".into()));
        }
        if self.records_per_stratum == 0 {
            return Err(AbaeError::InvalidSpec("empty strata".into()));
        }
        if !(0.0..1.0).contains(&self.proxy_noise) {
            return Err(AbaeError::InvalidSpec(format!(
                "proxy_noise {} outside [0, 1)",
                self.proxy_noise
            )));
        }
        let m = self.records_per_stratum as f64;
        let mut any_matched = false;
        for (k, s) in self.strata.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.p) {
                return Err(AbaeError::InvalidSpec(format!(
                    "stratum {k}: p={} outside [0, 1]",
                    s.p
                )));
            }
            if !s.mu.is_finite() || !s.sigma.is_finite() || s.sigma < 0.0 {
                return Err(AbaeError::InvalidSpec(format!(
                    "stratum {k}: bad mu/sigma ({}, {})",
                    s.mu, s.sigma
                )));
            }
            if (s.p * m).round() >= 1.0 {
                any_matched = true;
            }
        }
        if !any_matched {
            return Err(AbaeError::InvalidSpec(
                "no stratum rounds to a single matching record".into(),
            ));
        }
        Ok(())
    }

    /// The population the spec parameters describe (as opposed to the
    /// realized one [`generate`] measures).
    pub fn param_population(&self) -> Result<TruePopulation, AbaeError> {
        TruePopulation::from_params(
            self.strata.iter().map(|s| s.p).collect(),
            self.strata.iter().map(|s| s.mu).collect(),
            self.strata.iter().map(|s| s.sigma).collect(),
        )
    }
}

/// Emits `k * records_per_stratum` records and measures the realized
/// population on the same proxy partition the engine will use.
///
/// Per construction stratum: proxies land in the band `[k/K, (k+1)/K)`
/// blended with `proxy_noise` of global uniform; exactly `round(p * m)`
/// records match, chosen at random; matched values follow the value law
/// (two-point splits the signs evenly for an exact mean and variance when
/// the count is even). The returned ground truth holds the realized rates
/// and matched-value moments of each stratified group; its `mu_all` is
/// evaluated with the estimator's own combining arithmetic, so a full
/// enumeration run reproduces it bit for bit.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, TruePopulation), AbaeError> {
    spec.validate()?;
    let k = spec.k();
    let m = spec.records_per_stratum;
    let mut records = Vec::with_capacity(k * m);

    for (s, stratum) in spec.strata.iter().enumerate() {
        let mut rng = spec.seed.child(s as u64).rng();
        let lo = s as f64 / k as f64;

        let mut proxies = Vec::with_capacity(m);
        for _ in 0..m {
            let band = lo + rng.random::<f64>() / k as f64;
            let global = rng.random::<f64>();
            proxies.push((1.0 - spec.proxy_noise) * band + spec.proxy_noise * global);
        }

        let b = ((stratum.p * m as f64).round() as usize).min(m);
        let mut order: Vec<usize> = (0..m).collect();
        for i in 0..b {
            let j = rng.random_range(i..m);
            order.swap(i, j);
        }
        let mut matched = vec![false; m];
        for &idx in &order[..b] {
            matched[idx] = true;
        }

        let mut values = vec![0.0f64; m];
        match spec.value_law {
            ValueLaw::TwoPoint => {
                // exact composition: half of the matched records (randomly
                // chosen, already shuffled in `order`) sit at mu + sigma
                let mut plus = b / 2;
                if b % 2 == 1 && rng.random::<bool>() {
                    plus += 1;
                }
                for (rank, &idx) in order[..b].iter().enumerate() {
                    values[idx] = if rank < plus {
                        stratum.mu + stratum.sigma
                    } else {
                        stratum.mu - stratum.sigma
                    };
                }
            }
            ValueLaw::TruncatedNormal => {
                for &idx in &order[..b] {
                    values[idx] = spec.value_law.draw(&mut rng, stratum.mu, stratum.sigma);
                }
            }
        }
        // unmatched records carry decoy values from the same law
        for idx in 0..m {
            if !matched[idx] {
                values[idx] = spec.value_law.draw(&mut rng, stratum.mu, stratum.sigma);
            }
        }

        for idx in 0..m {
            records.push(Record::new(
                (s * m + idx) as u64,
                proxies[idx],
                Some((matched[idx], values[idx])),
            ));
        }
    }

    let dataset = Dataset::new(records)?;
    let truth = measure_population(&dataset, k)?;
    Ok((dataset, truth))
}

/// Realized population of a labeled dataset over its `k`-way proxy
/// partition: per-group matched rate, matched mean (same arithmetic as the
/// stage-1 estimator), and population standard deviation.
pub fn measure_population(dataset: &Dataset, k: usize) -> Result<TruePopulation, AbaeError> {
    let strata = stratify(dataset, k)?;
    let mut est = StratumEstimates {
        p_hat: Vec::with_capacity(k),
        mu_hat: Vec::with_capacity(k),
        sigma_hat: Vec::with_capacity(k),
        b: Vec::with_capacity(k),
        drawn: Vec::with_capacity(k),
    };
    let mut sigma_pop = Vec::with_capacity(k);
    for group in strata.groups() {
        let pairs: Vec<(bool, f64)> = group
            .iter()
            .map(|&id| {
                let r = dataset.get(id).expect("own partition");
                r.raw_truth().ok_or(AbaeError::MissingTruth { id })
            })
            .collect::<Result<_, _>>()?;
        let (b, mu, _) = matched_stats(&pairs);
        let var = if b == 0 {
            0.0
        } else {
            kahan_sum(
                pairs
                    .iter()
                    .filter(|p| p.0)
                    .map(|p| (p.1 - mu) * (p.1 - mu)),
            ) / b as f64
        };
        est.p_hat.push(b as f64 / group.len() as f64);
        est.mu_hat.push(mu);
        est.sigma_hat.push(var.sqrt());
        est.b.push(b);
        est.drawn.push(group.len() as u64);
        sigma_pop.push(var.sqrt());
    }
    let mu_all = estimate_mu_all(&est).map_err(|_| {
        AbaeError::InvalidSpec("the predicate matches no record in the dataset".into())
    })?;
    TruePopulation::with_mu_all(est.p_hat, est.mu_hat, sigma_pop, mu_all)
}
