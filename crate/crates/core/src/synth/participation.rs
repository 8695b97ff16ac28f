use rand::Rng;

use super::config::ParticipationConfig;
use super::truth::TruthRecord;
use crate::domain::{Covariates, DesignSpec};
use crate::rng;
use crate::stats::logistic;

const BETA0_BRACKET: f64 = 40.0;

/// `logistic(beta0 + beta_age·age + beta_gender·woman + beta_smoking·smoking + beta_event·event)`,
/// where `event` is onset observed during follow-up.
pub fn participation_probability(
    cfg: &ParticipationConfig,
    beta0: f64,
    cov: &Covariates,
    smoking: bool,
    event: bool,
) -> f64 {
    let y = f64::from(u8::from(smoking));
    let e = f64::from(u8::from(event));
    logistic(
        beta0
            + cfg.beta_age * cov.age_at_baseline
            + cfg.beta_gender * cov.gender.indicator()
            + cfg.beta_smoking * y
            + cfg.beta_event * e,
    )
}

/// Intercept at which the mean participation probability over `persons`
/// equals `target`, found by bisection. The mean is increasing in the intercept.
pub fn calibrate_intercept(cfg: &ParticipationConfig, persons: &[(&Covariates, bool, bool)], target: f64) -> f64 {
    if persons.is_empty() {
        return cfg.beta0;
    }
    let mean_at = |b0: f64| {
        persons
            .iter()
            .map(|&(c, y, e)| participation_probability(cfg, b0, c, y, e))
            .sum::<f64>()
            / persons.len() as f64
    };
    let (mut lo, mut hi) = (-BETA0_BRACKET, BETA0_BRACKET);
    if mean_at(hi) <= target {
        return hi;
    }
    if mean_at(lo) >= target {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Draws participation for the sampled persons of one wave and returns the
/// intercept used. Persons outside the sample never participate.
pub fn apply_participation(
    truth: &mut [TruthRecord],
    design: &DesignSpec,
    cfg: &ParticipationConfig,
    seed: u64,
) -> f64 {
    let in_wave = |t: &TruthRecord| t.covariates.study_year == design.year;
    let beta0 = if cfg.calibrate {
        let sampled: Vec<(&Covariates, bool, bool)> = truth
            .iter()
            .filter(|t| in_wave(t) && t.sampled)
            .map(|t| (&t.covariates, t.smoking, t.followup().event_observed))
            .collect();
        calibrate_intercept(cfg, &sampled, design.target_participation_rate)
    } else {
        cfg.beta0
    };
    for (i, t) in truth.iter_mut().enumerate().filter(|(_, t)| in_wave(t)) {
        t.participated = if t.sampled {
            let p = participation_probability(cfg, beta0, &t.covariates, t.smoking, t.followup().event_observed);
            rng::stream(seed, rng::domain::PARTICIPATION, i as u64).random::<f64>() < p
        } else {
            false
        };
    }
    beta0
}
