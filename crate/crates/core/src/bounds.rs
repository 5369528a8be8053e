//! Closed-form concentration bounds on the quantities the two-stage sampler
//! estimates, plus a Monte Carlo validator that measures how often each
//! stated inequality is violated under its own sampling model.
//!
//! Every calculator implements the explicit finite-sample form (no
//! asymptotic simplification), so each is directly checkable: simulate the
//! stage, count violations, compare against the stated failure probability.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::allocation::{optimal_allocation, TruePopulation};
use crate::error::AbaeError;
use crate::rng::RngSeed;
use crate::synthgen::ValueLaw;

/// Failure-probability levels and the envelope constants the bounds consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Stage-1 per-event failure probability.
    pub delta: f64,
    /// Stage-2 per-event failure probability.
    pub gamma: f64,
    /// Bound on |value|.
    pub c_mu: f64,
    /// Bound on the per-stratum standard deviation.
    pub c_sigma: f64,
    /// Bound consumed by the variance half-width.
    pub c_mu4: f64,
    /// Lower bound on the overall positive rate.
    pub c_pall: f64,
}

impl BoundParams {
    /// Envelope constants for a known population under a given value law
    /// (maxima across strata, minimum for the rate floor).
    pub fn for_population(
        pop: &TruePopulation,
        law: ValueLaw,
        delta: f64,
        gamma: f64,
    ) -> Result<Self, AbaeError> {
        for (name, level) in [("delta", delta), ("gamma", gamma)] {
            if !(level > 0.0 && level < 1.0) {
                return Err(AbaeError::InvalidSpec(format!(
                    "{name} {level} outside (0, 1)"
                )));
            }
        }
        let fold = |f: &dyn Fn(usize) -> f64| {
            (0..pop.k())
                .map(f)
                .fold(0.0f64, f64::max)
        };
        Ok(Self {
            delta,
            gamma,
            c_mu: fold(&|k| law.c_mu(pop.mu[k], pop.sigma[k])),
            c_sigma: fold(&|k| law.c_sigma(pop.sigma[k])),
            c_mu4: fold(&|k| law.c_mu4(pop.sigma[k])),
            c_pall: pop.p_all,
        })
    }
}

fn ln_inv(level: f64) -> f64 {
    assert!(level > 0.0 && level <= 1.0, "level outside (0, 1]");
    (1.0 / level).ln()
}

/// Upper confidence limit for a stage-1 rate estimate:
/// `p + sqrt(2 ln(1/delta) p / n1)`.
pub fn p_upper_bound(p: f64, n1: u64, delta: f64) -> f64 {
    p + (2.0 * ln_inv(delta) * p / n1 as f64).sqrt()
}

/// Lower counterpart, clamped at 0: `p - sqrt(2 ln(1/delta) p / n1)`.
pub fn p_lower_bound(p: f64, n1: u64, delta: f64) -> f64 {
    (p - (2.0 * ln_inv(delta) * p / n1 as f64).sqrt()).max(0.0)
}

/// Lower confidence limit on the stage-1 matched count, clamped at 0:
/// `p n1 - sqrt(2 ln(1/delta) p n1)`.
pub fn b1_lower_bound(p: f64, n1: u64, delta: f64) -> f64 {
    let mean = p * n1 as f64;
    (mean - (2.0 * ln_inv(delta) * mean).sqrt()).max(0.0)
}

/// Half-width of the deviation bound on the unbiased sample variance built
/// from `b1` matched samples: `sqrt(8 ln(1/delta) c_mu4 / b1)`.
pub fn sigma2_halfwidth(b1: u64, delta: f64, c_mu4: f64) -> Result<f64, AbaeError> {
    if b1 < 2 {
        return Err(AbaeError::InsufficientMatches { b1 });
    }
    Ok((8.0 * ln_inv(delta) * c_mu4 / b1 as f64).sqrt())
}

/// Rate cutoff below which a stratum's stage-1 sample is too thin for the
/// allocation bounds: `(2 ln(1/delta) + 2 sqrt(ln(1/delta)) + 2) / n1`.
pub fn p_star(n1: u64, delta: f64) -> f64 {
    let l = ln_inv(delta);
    (2.0 * l + 2.0 * l.sqrt() + 2.0) / n1 as f64
}

/// Lower confidence limit on the stage-2 matched count of a stratum with
/// share `t_hat`, clamped at 0: `m (1 - sqrt(2 ln(1/gamma) / m))` where
/// `m = p t_hat n2`.
pub fn b2_lower_bound(p: f64, t_hat: f64, n2: u64, gamma: f64) -> f64 {
    let m = p * t_hat * n2 as f64;
    if m <= 0.0 {
        return 0.0;
    }
    (m * (1.0 - (2.0 * ln_inv(gamma) / m).sqrt())).max(0.0)
}

/// Confidence band for the stratum weight `w_k = p_k / p_all` implied by the
/// per-stratum rate bands: lower `(p_k - width_k)/(p_all + sum of widths)`,
/// upper `(p_k + width_k)/(p_all - sum of widths)`. The upper limit is
/// `+inf` when the widths swallow the whole denominator.
pub fn w_bounds(pop: &TruePopulation, k: usize, n1: u64, delta: f64) -> (f64, f64) {
    let widths: Vec<f64> = pop
        .p
        .iter()
        .map(|&p| (2.0 * ln_inv(delta) * p / n1 as f64).sqrt())
        .collect();
    let total: f64 = widths.iter().sum();
    let lower = (pop.p[k] - widths[k]).max(0.0) / (pop.p_all + total);
    let denom = pop.p_all - total;
    let upper = if denom > 0.0 {
        (pop.p[k] + widths[k]) / denom
    } else {
        f64::INFINITY
    };
    (lower, upper)
}

/// Upper confidence limit on the allocation weight ingredient:
/// `sqrt(p) sigma + sqrt(2 / n1) c_sigma`.
pub fn sqrt_p_sigma_upper_bound(p: f64, sigma: f64, n1: u64, c_sigma: f64) -> f64 {
    p.sqrt() * sigma + (2.0 / n1 as f64).sqrt() * c_sigma
}

/// The five validated inequalities, identified by the artifact's stable
/// numeric ids (1, 2, 4, 5, 8).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// Rate estimate does not overshoot its upper limit.
    PHatUpper,
    /// Rate estimate does not undershoot its lower limit.
    PHatLower,
    /// Stage-1 matched count reaches its lower limit.
    B1Lower,
    /// Sample variance stays within the half-width of the truth.
    SigmaSq,
    /// Stage-2 matched count reaches its lower limit.
    B2Lower,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::PHatUpper,
        BoundKind::PHatLower,
        BoundKind::B1Lower,
        BoundKind::SigmaSq,
        BoundKind::B2Lower,
    ];

    pub fn id(&self) -> u8 {
        match self {
            BoundKind::PHatUpper => 1,
            BoundKind::PHatLower => 2,
            BoundKind::B1Lower => 4,
            BoundKind::SigmaSq => 5,
            BoundKind::B2Lower => 8,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.id() == id)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::PHatUpper => "p-hat-upper",
            BoundKind::PHatLower => "p-hat-lower",
            BoundKind::B1Lower => "b1-lower",
            BoundKind::SigmaSq => "sigma-sq",
            BoundKind::B2Lower => "b2-lower",
        }
    }
}

/// Monte Carlo verdict for one inequality at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub lemma: u8,
    pub kind: BoundKind,
    pub trials: u64,
    pub violations: u64,
    /// Allowed failure probability after the union over strata.
    pub nominal: f64,
    pub empirical: f64,
    /// `empirical <= nominal + 3 sqrt(nominal (1 - nominal) / trials)`.
    pub pass: bool,
}

/// Simulation settings for [`validate_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub n1: u64,
    pub n2: u64,
    /// delta for the stage-1 bounds, gamma for the stage-2 bound.
    pub level: f64,
    pub trials: u64,
    pub law: ValueLaw,
    /// Fixed stage-2 shares; `None` re-derives them from each trial's
    /// simulated stage 1.
    pub t_override: Option<Vec<f64>>,
}

fn draw_binomial(rng: &mut impl Rng, n: u64, p: f64) -> u64 {
    if p <= 0.0 || n == 0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    }
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Simulates the sampling model `cfg.trials` times from `pop` and counts how
/// often the chosen inequality fails in any stratum it covers. The nominal
/// level is the per-stratum level times the number of covered strata (the
/// union bound), doubled for the two-sided variance check; the stage-2 check
/// covers only strata whose rate clears [`p_star`].
pub fn validate_bound(
    kind: BoundKind,
    pop: &TruePopulation,
    cfg: &ValidationConfig,
    seed: RngSeed,
) -> Result<BoundCheckReport, AbaeError> {
    if cfg.trials < 1000 {
        return Err(AbaeError::InvalidSpec(format!(
            "validator needs at least 1000 trials, got {}",
            cfg.trials
        )));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(AbaeError::InvalidSpec(format!(
            "level {} outside (0, 1)",
            cfg.level
        )));
    }
    if cfg.n1 == 0 {
        return Err(AbaeError::InvalidSpec("n1 must be positive".into()));
    }
    if let Some(t) = &cfg.t_override {
        if t.len() != pop.k() {
            return Err(AbaeError::InvalidSpec(
                "t_override length differs from the population".into(),
            ));
        }
    }

    let k = pop.k();
    let level = cfg.level;
    let per_stratum_events: f64 = match kind {
        BoundKind::SigmaSq => 2.0 * k as f64,
        BoundKind::B2Lower => {
            let cutoff = p_star(cfg.n1, level);
            pop.p.iter().filter(|&&p| p > cutoff).count() as f64
        }
        _ => k as f64,
    };
    let nominal = (per_stratum_events * level).min(1.0);

    let mut rng = seed.rng();
    let mut violations = 0u64;
    let mut values = Vec::new();
    for _ in 0..cfg.trials {
        let mut violated = false;
        match kind {
            BoundKind::PHatUpper | BoundKind::PHatLower | BoundKind::B1Lower => {
                for s in 0..k {
                    let b1 = draw_binomial(&mut rng, cfg.n1, pop.p[s]);
                    let p_hat = b1 as f64 / cfg.n1 as f64;
                    violated |= match kind {
                        BoundKind::PHatUpper => p_hat > p_upper_bound(pop.p[s], cfg.n1, level),
                        BoundKind::PHatLower => p_hat < p_lower_bound(pop.p[s], cfg.n1, level),
                        _ => (b1 as f64) < b1_lower_bound(pop.p[s], cfg.n1, level),
                    };
                }
            }
            BoundKind::SigmaSq => {
                for s in 0..k {
                    let b1 = draw_binomial(&mut rng, cfg.n1, pop.p[s]);
                    if b1 < 2 {
                        continue; // the bound does not speak to thin strata
                    }
                    values.clear();
                    for _ in 0..b1 {
                        values.push(cfg.law.draw(&mut rng, pop.mu[s], pop.sigma[s]));
                    }
                    let sd = sample_sd(&values);
                    let half = sigma2_halfwidth(b1, level, cfg.law.c_mu4(pop.sigma[s]))?;
                    violated |= (sd * sd - pop.sigma[s] * pop.sigma[s]).abs() > half;
                }
            }
            BoundKind::B2Lower => {
                let t_hat = match &cfg.t_override {
                    Some(t) => t.clone(),
                    None => {
                        // stage-1 simulation feeds the empirical allocation
                        let mut p_hat = Vec::with_capacity(k);
                        let mut sigma_hat = Vec::with_capacity(k);
                        for s in 0..k {
                            let b1 = draw_binomial(&mut rng, cfg.n1, pop.p[s]);
                            p_hat.push(b1 as f64 / cfg.n1 as f64);
                            values.clear();
                            for _ in 0..b1 {
                                values.push(cfg.law.draw(&mut rng, pop.mu[s], pop.sigma[s]));
                            }
                            sigma_hat.push(sample_sd(&values));
                        }
                        match TruePopulation::from_params(
                            p_hat,
                            vec![0.0; k],
                            sigma_hat,
                        ) {
                            Ok(est_pop) => optimal_allocation(&est_pop).t,
                            Err(_) => vec![1.0 / k as f64; k], // stage 1 saw nothing anywhere
                        }
                    }
                };
                let cutoff = p_star(cfg.n1, level);
                for s in 0..k {
                    if pop.p[s] <= cutoff {
                        continue;
                    }
                    let draws = (t_hat[s] * cfg.n2 as f64).ceil() as u64;
                    let b2 = draw_binomial(&mut rng, draws, pop.p[s]);
                    violated |=
                        (b2 as f64) < b2_lower_bound(pop.p[s], t_hat[s], cfg.n2, level);
                }
            }
        }
        violations += violated as u64;
    }

    let empirical = violations as f64 / cfg.trials as f64;
    let slack = 3.0 * (nominal * (1.0 - nominal) / cfg.trials as f64).sqrt();
    Ok(BoundCheckReport {
        lemma: kind.id(),
        kind,
        trials: cfg.trials,
        violations,
        nominal,
        empirical,
        pass: empirical <= nominal + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN20: f64 = 2.995732273553991;

    fn pop(p: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> TruePopulation {
        TruePopulation::from_params(p, mu, sigma).unwrap()
    }

    fn cfg(n1: u64, n2: u64, level: f64, trials: u64) -> ValidationConfig {
        ValidationConfig {
            n1,
            n2,
            level,
            trials,
            law: ValueLaw::TwoPoint,
            t_override: None,
        }
    }

    #[test]
    fn rate_bounds_match_hand_values() {
        assert!((p_upper_bound(0.5, 100, 0.05) - 0.6730818382602285).abs() < 1e-15);
        assert!((p_lower_bound(0.5, 100, 0.05) - 0.3269181617397715).abs() < 1e-15);
        assert_eq!(p_upper_bound(0.0, 100, 0.5), 0.0);
        assert_eq!(p_upper_bound(0.5, 100, 1.0), 0.5);
        assert_eq!(p_lower_bound(0.5, 100, 1.0), 0.5);
        // tiny p: the width dominates and the floor engages
        assert_eq!(p_lower_bound(0.001, 100, 0.05), 0.0);
    }

    #[test]
    fn widths_equal_the_stated_slack_form() {
        // both rate bounds offset p by exactly sqrt(2 ln(1/delta) p / n1)
        for &(p, n1, d) in &[(0.3f64, 50u64, 0.1f64), (0.5, 100, 0.05), (0.9, 400, 0.01)] {
            let lambda = (2.0 * (1.0 / d).ln() * p / n1 as f64).sqrt();
            assert!((p_upper_bound(p, n1, d) - p - lambda).abs() < 1e-15);
            assert!((p - p_lower_bound(p, n1, d) - lambda).abs() < 1e-15);
        }
    }

    #[test]
    fn b1_bound_examples() {
        assert!((b1_lower_bound(0.5, 100, 0.05) - (50.0 - (2.0 * LN20 * 50.0).sqrt())).abs() < 1e-12);
        assert!((b1_lower_bound(0.5, 100, 0.05) - 32.691816173977145).abs() < 1e-12);
        assert_eq!(b1_lower_bound(1.0, 100, 1.0), 100.0);
        assert_eq!(b1_lower_bound(0.001, 10, 0.05), 0.0);
    }

    #[test]
    fn sigma2_halfwidth_examples() {
        assert!((sigma2_halfwidth(32, 0.05, 1.0).unwrap() - 0.8654091913011427).abs() < 1e-15);
        assert!(sigma2_halfwidth(1_000_000_000, 0.05, 1.0).unwrap() < 1e-3);
        assert!(matches!(
            sigma2_halfwidth(1, 0.05, 1.0),
            Err(AbaeError::InsufficientMatches { b1: 1 })
        ));
    }

    #[test]
    fn p_star_examples() {
        let e_inv = 1.0 / std::f64::consts::E;
        assert!((p_star(600, e_inv) - 0.01).abs() < 1e-15);
        assert!((p_star(100, 1.0) - 0.02).abs() < 1e-15);
        assert!((p_star(100, 0.05) - 2.0 * p_star(200, 0.05)).abs() < 1e-15);
    }

    #[test]
    fn b2_bound_examples() {
        assert!((b2_lower_bound(0.5, 0.5, 400, 0.05) - 75.52253169319184).abs() < 1e-12);
        assert_eq!(b2_lower_bound(0.5, 0.5, 400, 1.0), 100.0);
        assert_eq!(b2_lower_bound(1e-9, 1e-9, 10, 0.5), 0.0);
        assert_eq!(b2_lower_bound(0.0, 0.5, 400, 0.05), 0.0);
    }

    #[test]
    fn w_bounds_explicit_fractions() {
        let pop = pop(vec![0.3, 0.5], vec![0.0, 0.0], vec![1.0, 1.0]);
        let (lo, hi) = w_bounds(&pop, 0, 100, 0.05);
        assert!((lo - 0.14987248031691108).abs() < 1e-14);
        assert!((hi - 0.8807325048102876).abs() < 1e-14);
        // the band brackets the true weight
        assert!(lo <= 0.375 && 0.375 <= hi);
        // a miniature stage 1 blows the denominator: sentinel upper limit
        let (_, sentinel) = w_bounds(&pop, 0, 1, 0.05);
        assert!(sentinel.is_infinite());
    }

    #[test]
    fn sqrt_p_sigma_bound_example() {
        assert!((sqrt_p_sigma_upper_bound(0.25, 2.0, 50, 2.0) - 1.4).abs() < 1e-15);
        // holds on the true parameters by construction
        assert!(sqrt_p_sigma_upper_bound(0.25, 2.0, 50, 2.0) >= 0.25f64.sqrt() * 2.0);
    }

    #[test]
    fn calculators_widen_as_delta_shrinks() {
        let grid = [0.5, 0.2, 0.1, 0.05, 0.01, 0.001];
        for w in grid.windows(2) {
            let (looser, tighter) = (w[0], w[1]);
            assert!(p_upper_bound(0.4, 100, tighter) > p_upper_bound(0.4, 100, looser));
            assert!(p_lower_bound(0.4, 100, tighter) < p_lower_bound(0.4, 100, looser));
            assert!(b1_lower_bound(0.4, 100, tighter) < b1_lower_bound(0.4, 100, looser));
            assert!(
                sigma2_halfwidth(32, tighter, 1.0).unwrap()
                    > sigma2_halfwidth(32, looser, 1.0).unwrap()
            );
            assert!(p_star(100, tighter) > p_star(100, looser));
            assert!(b2_lower_bound(0.5, 0.5, 400, tighter) < b2_lower_bound(0.5, 0.5, 400, looser));
            let pop = pop(vec![0.3, 0.5], vec![0.0, 0.0], vec![1.0, 1.0]);
            let (lo_t, hi_t) = w_bounds(&pop, 0, 100, tighter);
            let (lo_l, hi_l) = w_bounds(&pop, 0, 100, looser);
            assert!(lo_t <= lo_l && hi_t >= hi_l);
        }
    }

    #[test]
    fn params_from_population_take_envelopes() {
        let pop = pop(vec![0.5, 0.5], vec![1.0, -4.0], vec![1.0, 2.0]);
        let params = BoundParams::for_population(&pop, ValueLaw::TwoPoint, 0.05, 0.05).unwrap();
        assert_eq!(params.c_mu, 6.0);
        assert_eq!(params.c_sigma, 2.0);
        assert_eq!(params.c_mu4, 64.0);
        assert_eq!(params.c_pall, 1.0);
        assert!(BoundParams::for_population(&pop, ValueLaw::TwoPoint, 1.5, 0.05).is_err());
    }

    #[test]
    fn validator_passes_on_a_simple_rate_bound() {
        let pop = pop(vec![0.5], vec![0.0], vec![1.0]);
        let report = validate_bound(
            BoundKind::PHatLower,
            &pop,
            &cfg(100, 0, 0.05, 2000),
            RngSeed::new(42),
        )
        .unwrap();
        assert_eq!(report.lemma, 2);
        assert_eq!(report.nominal, 0.05);
        assert!(report.pass, "empirical {}", report.empirical);
    }

    #[test]
    fn zero_rate_stratum_never_violates_the_upper_bound() {
        let pop = pop(vec![0.0, 0.5], vec![0.0, 0.0], vec![1.0, 1.0]);
        let report = validate_bound(
            BoundKind::PHatUpper,
            &pop,
            &cfg(50, 0, 0.5, 1000),
            RngSeed::new(7),
        )
        .unwrap();
        assert!(report.pass);
    }

    #[test]
    fn variance_bound_validator_passes_both_laws() {
        let pop = pop(vec![0.6, 0.9], vec![1.0, 2.0], vec![1.0, 3.0]);
        for law in [ValueLaw::TwoPoint, ValueLaw::TruncatedNormal] {
            let mut c = cfg(120, 0, 0.1, 1500);
            c.law = law;
            let report = validate_bound(BoundKind::SigmaSq, &pop, &c, RngSeed::new(3)).unwrap();
            assert_eq!(report.nominal, (4.0 * 0.1f64).min(1.0));
            assert!(report.pass, "{law:?}: empirical {}", report.empirical);
        }
    }

    #[test]
    fn stage2_bound_with_true_shares() {
        let pop = pop(vec![0.3, 0.6], vec![0.0, 0.0], vec![1.0, 2.0]);
        let mut c = cfg(200, 1000, 0.05, 2000);
        c.t_override = Some(optimal_allocation(&pop).t);
        let report = validate_bound(BoundKind::B2Lower, &pop, &c, RngSeed::new(9)).unwrap();
        // both rates clear the cutoff at this stage-1 size
        assert_eq!(report.nominal, 0.1);
        assert!(report.pass, "empirical {}", report.empirical);
    }

    #[test]
    fn stage2_bound_with_estimated_shares() {
        let pop = pop(vec![0.3, 0.6], vec![0.0, 0.0], vec![1.0, 2.0]);
        let report = validate_bound(
            BoundKind::B2Lower,
            &pop,
            &cfg(200, 1000, 0.05, 2000),
            RngSeed::new(10),
        )
        .unwrap();
        assert!(report.pass, "empirical {}", report.empirical);
    }

    #[test]
    fn validator_rejects_bad_configs() {
        let pop = pop(vec![0.5], vec![0.0], vec![1.0]);
        assert!(validate_bound(BoundKind::PHatUpper, &pop, &cfg(100, 0, 0.05, 999), RngSeed::new(0)).is_err());
        assert!(validate_bound(BoundKind::PHatUpper, &pop, &cfg(100, 0, 1.0, 1000), RngSeed::new(0)).is_err());
        assert!(validate_bound(BoundKind::PHatUpper, &pop, &cfg(0, 0, 0.05, 1000), RngSeed::new(0)).is_err());
        let mut c = cfg(100, 0, 0.05, 1000);
        c.t_override = Some(vec![1.0, 0.0]);
        assert!(validate_bound(BoundKind::B2Lower, &pop, &c, RngSeed::new(0)).is_err());
    }

    #[test]
    fn kind_ids_round_trip() {
        for kind in BoundKind::ALL {
            assert_eq!(BoundKind::from_id(kind.id()), Some(kind));
        }
        assert_eq!(BoundKind::from_id(3), None);
        assert_eq!(BoundKind::PHatLower.name(), "p-hat-lower");
    }

    #[test]
    fn report_pass_rule_is_the_three_se_band() {
        let pop = pop(vec![0.5], vec![0.0], vec![1.0]);
        let report = validate_bound(
            BoundKind::PHatUpper,
            &pop,
            &cfg(100, 0, 0.05, 10_000),
            RngSeed::new(1),
        )
        .unwrap();
        let slack = 3.0 * (report.nominal * (1.0 - report.nominal) / 10_000.0).sqrt();
        assert_eq!(report.pass, report.empirical <= report.nominal + slack);
        assert_eq!(report.empirical, report.violations as f64 / 10_000.0);
    }
}
