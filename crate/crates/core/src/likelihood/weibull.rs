//! Left-truncated Weibull contributions with scale `b` and shape `a`:
//! `S(t) = exp(-b t^a)`, `h(t) = a b t^(a-1)`.

use crate::error::{Error, Result};

const MIN_TIME: f64 = 1e-12;

/// `t^a` computed as `exp(a ln t)` with `t` clamped away from zero; exactly
/// zero at `t = 0`.
#[inline]
pub fn pow_time(t: f64, a: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (a * t.max(MIN_TIME).ln()).exp()
}

fn check(a: f64, b: f64, t0: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("shape must be positive, got {a}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("scale must be positive, got {b}")));
    }
    if !(t0 >= 0.0 && t0.is_finite()) {
        return Err(Error::Domain(format!("entry age must be non-negative, got {t0}")));
    }
    Ok(())
}

/// Log density of an event at `t1` given survival past the entry age `t0`.
pub fn weibull_event_loglik(a: f64, b: f64, t0: f64, t1: f64) -> Result<f64> {
    check(a, b, t0)?;
    if !(t1 > t0) || !t1.is_finite() {
        return Err(Error::Domain(format!("event age {t1} must exceed entry age {t0}")));
    }
    Ok(event_term(a.ln(), a, b.ln(), t1.max(MIN_TIME).ln(), pow_time(t0, a), pow_time(t1, a)))
}

/// Log probability of surviving past `t1` given survival past `t0`.
pub fn weibull_censored_loglik(a: f64, b: f64, t0: f64, t1: f64) -> Result<f64> {
    check(a, b, t0)?;
    if !(t1 >= t0) || !t1.is_finite() {
        return Err(Error::Domain(format!("censoring age {t1} precedes entry age {t0}")));
    }
    if t1 == t0 {
        return Ok(0.0);
    }
    Ok(censored_term(b, pow_time(t0, a), pow_time(t1, a)))
}

pub fn weibull_log_hazard(a: f64, b: f64, t: f64) -> f64 {
    a.ln() + b.ln() + (a - 1.0) * t.max(MIN_TIME).ln()
}

#[inline]
pub(crate) fn event_term(ln_a: f64, a: f64, ln_b: f64, ln_t1: f64, t0a: f64, t1a: f64) -> f64 {
    ln_a + ln_b + (a - 1.0) * ln_t1 - ln_b.exp() * (t1a - t0a)
}

#[inline]
pub(crate) fn censored_term(b: f64, t0a: f64, t1a: f64) -> f64 {
    -b * (t1a - t0a)
}

/// Inverse-CDF draw from the Weibull left-truncated at `entry`:
/// `t = (entry^a - ln(u) / b)^(1/a)` for `u` uniform on `(0, 1]`.
pub fn sample_truncated(a: f64, b: f64, entry: f64, u: f64) -> f64 {
    let u = u.max(f64::MIN_POSITIVE);
    (pow_time(entry, a) - u.ln() / b).powf(1.0 / a)
}
