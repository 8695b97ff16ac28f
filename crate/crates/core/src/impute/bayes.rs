use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Covariates, FollowUp, ModelParams};
use crate::error::{Error, Result};
use crate::likelihood::{
    linear_predictor_log_b, sample_truncated, smoking_logit, weibull_censored_loglik, weibull_event_loglik,
};
use crate::stats::{log_add_exp, log_logistic};

/// Smallest and largest probability returned by the Bayes update.
pub const PROB_EPS: f64 = 1e-15;

/// How a censored non-participant's latent onset age is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoredMode {
    /// Component chosen with weight `s·S1(c)` vs `(1-s)·S0(c)` and onset drawn
    /// beyond the censoring age `c`.
    #[default]
    Conditioned,
    /// Component chosen with the prior weight `s` and onset drawn beyond the
    /// baseline age, ignoring that the person was disease-free at `c`.
    FromBaseline,
}

fn survival_loglik(a: f64, log_b: f64, t0: f64, f: &FollowUp) -> Result<f64> {
    if f.event_observed {
        weibull_event_loglik(a, log_b.exp(), t0, f.event_age)
    } else {
        weibull_censored_loglik(a, log_b.exp(), t0, f.event_age)
    }
}

/// `P(Y = 1 | T, X)` from the prior log odds pieces and the two survival log-likelihoods.
pub fn posterior_from_parts(log_s: f64, log_not_s: f64, loglik1: f64, loglik0: f64) -> f64 {
    let num = log_s + loglik1;
    let den = log_add_exp(num, log_not_s + loglik0);
    let p = if den == f64::NEG_INFINITY { 0.0 } else { (num - den).exp() };
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Probability of smoking given covariates and follow-up, by Bayes' rule with
/// the event density or the survival probability as the likelihood.
pub fn smoking_posterior_prob(params: &ModelParams, cov: &Covariates, followup: &FollowUp) -> Result<f64> {
    let eta = smoking_logit(cov, params)?;
    let t0 = cov.age_at_baseline;
    let l1 = survival_loglik(params.shape_a, linear_predictor_log_b(cov, true, &params.gamma)?, t0, followup)?;
    let l0 = survival_loglik(params.shape_a, linear_predictor_log_b(cov, false, &params.gamma)?, t0, followup)?;
    Ok(posterior_from_parts(log_logistic(eta), log_logistic(-eta), l1, l0))
}

/// Draws a latent onset age for a person censored at `censor_age`, returning
/// the onset age and the mixture component (smoker or not) it came from.
pub fn draw_event_time_mixture<R: Rng + ?Sized>(
    params: &ModelParams,
    cov: &Covariates,
    censor_age: f64,
    mode: CensoredMode,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let t0 = cov.age_at_baseline;
    if !(censor_age >= t0) {
        return Err(Error::Domain(format!("censoring age {censor_age} precedes baseline {t0}")));
    }
    let a = params.shape_a;
    let eta = smoking_logit(cov, params)?;
    let lb1 = linear_predictor_log_b(cov, true, &params.gamma)?;
    let lb0 = linear_predictor_log_b(cov, false, &params.gamma)?;
    let (w1, entry) = match mode {
        CensoredMode::Conditioned => {
            let l1 = log_logistic(eta) + weibull_censored_loglik(a, lb1.exp(), t0, censor_age)?;
            let l0 = log_logistic(-eta) + weibull_censored_loglik(a, lb0.exp(), t0, censor_age)?;
            ((l1 - log_add_exp(l1, l0)).exp(), censor_age)
        }
        CensoredMode::FromBaseline => (log_logistic(eta).exp(), t0),
    };
    let component = rng.random::<f64>() < w1;
    let b = if component { lb1 } else { lb0 }.exp();
    let u = 1.0 - rng.random::<f64>();
    Ok((sample_truncated(a, b, entry, u), component))
}

/// One imputed smoking status: a Bernoulli draw from the posterior probability
/// for observed events, and the two-step draw (onset age, then smoking given
/// that onset) for censored follow-up.
pub fn impute_status<R: Rng + ?Sized>(
    params: &ModelParams,
    cov: &Covariates,
    followup: &FollowUp,
    mode: CensoredMode,
    rng: &mut R,
) -> Result<bool> {
    let p = if followup.event_observed {
        smoking_posterior_prob(params, cov, followup)?
    } else {
        let (t, _) = draw_event_time_mixture(params, cov, followup.event_age, mode, rng)?;
        if !(t > cov.age_at_baseline) {
            // onset can equal baseline only through rounding; use the censored probability
            return Ok(rng.random::<f64>() < smoking_posterior_prob(params, cov, followup)?);
        }
        let latent = FollowUp {
            event_age: t,
            event_observed: true,
        };
        smoking_posterior_prob(params, cov, &latent)?
    };
    Ok(rng.random::<f64>() < p)
}
