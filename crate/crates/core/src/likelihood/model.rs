//! Joint model: logistic smoking model per stratum and left-truncated Weibull
//! time-to-disease with a covariate-dependent scale.

use std::collections::BTreeMap;

use super::weibull::{censored_term, event_term, pow_time};
use crate::domain::{Covariates, GammaTerm, ModelParams, PersonRecord, Stratum, SurvivalCoefficients, N_GAMMA};
use crate::error::{Error, Result};
use crate::stats::{log_logistic, logistic};

/// Prior variance of every coefficient (and of `ln a`).
pub const PRIOR_VARIANCE: f64 = 1000.0;

/// Birth year at which the smoking intercept applies.
pub const BIRTH_YEAR_REFERENCE: f64 = 1930.0;

/// Normal(0, `PRIOR_VARIANCE`) log density.
#[inline]
pub fn normal_prior_logpdf(x: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * PRIOR_VARIANCE).ln() - x * x / (2.0 * PRIOR_VARIANCE)
}

/// Indicator row of the survival linear predictor for one person.
pub fn design_row(cov: &Covariates, smoking: bool, record: &str) -> Result<[f64; N_GAMMA]> {
    let area = cov.area.ok_or_else(|| Error::MissingArea(record.to_string()))?;
    let w = cov.gender.indicator();
    let y = f64::from(u8::from(smoking));
    let mut x = [0.0; N_GAMMA];
    x[0] = 1.0;
    x[1] = w;
    x[2] = y;
    x[3] = w * y;
    if let Some(i) = GammaTerm::Area(area).index() {
        x[i] = 1.0;
        x[GammaTerm::WomanArea(area).index().unwrap()] = w;
    }
    if let Some(i) = GammaTerm::Year(cov.study_year).index() {
        x[i] = 1.0;
        x[GammaTerm::WomanYear(cov.study_year).index().unwrap()] = w;
    }
    Ok(x)
}

/// `log b` for a person with the given covariates and smoking status.
pub fn linear_predictor_log_b(cov: &Covariates, smoking: bool, gamma: &SurvivalCoefficients) -> Result<f64> {
    let x = design_row(cov, smoking, "?")?;
    Ok(x.iter().zip(gamma.0.iter()).map(|(xi, g)| xi * g).sum())
}

/// Logit of the smoking probability.
pub fn smoking_logit(cov: &Covariates, params: &ModelParams) -> Result<f64> {
    let stratum = cov.stratum().ok_or_else(|| Error::MissingArea("?".into()))?;
    let (a0, a1) = params.alpha(stratum)?;
    Ok(a0 + a1 * (cov.birth_year() - BIRTH_YEAR_REFERENCE))
}

pub fn smoking_probability(cov: &Covariates, params: &ModelParams) -> Result<f64> {
    smoking_logit(cov, params).map(logistic)
}

/// Independent Normal(0, 1000) priors on `ln a`, every survival coefficient and
/// every stratum's smoking pair.
pub fn log_prior(params: &ModelParams) -> f64 {
    prior_terms(params).into_iter().sum()
}

/// The individual prior terms, in the order `ln a`, gammas, then (alpha0, alpha1) per stratum.
pub fn prior_terms(params: &ModelParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(1 + N_GAMMA + 2 * params.alpha0.len());
    out.push(normal_prior_logpdf(params.shape_a.ln()));
    out.extend(params.gamma.0.iter().map(|&g| normal_prior_logpdf(g)));
    for s in params.strata() {
        let (a0, a1) = params.alpha(s).expect("alpha maps are aligned");
        out.push(normal_prior_logpdf(a0));
        out.push(normal_prior_logpdf(a1));
    }
    out
}

/// Persons sharing a covariate pattern share `log b`; their time terms are stored together.
#[derive(Debug, Clone)]
struct PatternGroup {
    row: [f64; N_GAMMA],
    n_events: usize,
    /// `ln t1` for events.
    sum_ln_t1_events: f64,
    ln_t0: Vec<f64>,
    ln_t1: Vec<f64>,
    is_event: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
struct StratumGroup {
    /// Birth year minus the reference year.
    centered_birth: Vec<f64>,
    smoking: Vec<bool>,
}

/// Participant data laid out for fast log-posterior evaluation.
#[derive(Debug, Clone)]
pub struct LikelihoodWorkspace {
    patterns: Vec<PatternGroup>,
    strata: BTreeMap<Stratum, StratumGroup>,
    active: [bool; N_GAMMA],
    n_persons: usize,
}

/// Survival log-likelihood with its gradient in `(ln a, gamma)`.
#[derive(Debug, Clone)]
pub struct SurvivalEval {
    pub loglik: f64,
    pub d_ln_a: f64,
    pub d_gamma: [f64; N_GAMMA],
}

impl LikelihoodWorkspace {
    /// Builds the workspace from participants (records with `participated`);
    /// other records are ignored.
    pub fn from_participants(records: &[PersonRecord]) -> Result<Self> {
        let mut by_row: BTreeMap<Vec<u64>, PatternGroup> = BTreeMap::new();
        let mut strata: BTreeMap<Stratum, StratumGroup> = BTreeMap::new();
        let mut n_persons = 0;
        for r in records.iter().filter(|r| r.participated) {
            let c = &r.covariates;
            let smoking = r
                .smoking
                .ok_or_else(|| Error::Domain(format!("participant {} has no smoking status", r.id)))?;
            let fu = r
                .followup
                .ok_or_else(|| Error::Domain(format!("participant {} has no follow-up", r.id)))?;
            if !c.age_at_baseline.is_finite() || !fu.event_age.is_finite() {
                return Err(Error::NonFinite(format!("ages of record {}", r.id)));
            }
            if fu.event_observed && fu.event_age <= c.age_at_baseline
                || !fu.event_observed && fu.event_age < c.age_at_baseline
            {
                return Err(Error::Domain(format!("record {}: follow-up not after baseline", r.id)));
            }
            let row = design_row(c, smoking, &r.id)?;
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            let g = by_row.entry(key).or_insert_with(|| PatternGroup {
                row,
                n_events: 0,
                sum_ln_t1_events: 0.0,
                ln_t0: Vec::new(),
                ln_t1: Vec::new(),
                is_event: Vec::new(),
            });
            let ln_t0 = c.age_at_baseline.max(1e-12).ln();
            let ln_t1 = fu.event_age.max(1e-12).ln();
            g.ln_t0.push(ln_t0);
            g.ln_t1.push(ln_t1);
            g.is_event.push(fu.event_observed);
            if fu.event_observed {
                g.n_events += 1;
                g.sum_ln_t1_events += ln_t1;
            }
            let s = strata.entry(c.stratum().expect("area checked by design_row")).or_default();
            s.centered_birth.push(c.birth_year() - BIRTH_YEAR_REFERENCE);
            s.smoking.push(smoking);
            n_persons += 1;
        }
        let patterns: Vec<PatternGroup> = by_row.into_values().collect();
        let mut active = [false; N_GAMMA];
        for p in &patterns {
            for (k, &x) in p.row.iter().enumerate() {
                active[k] |= x != 0.0;
            }
        }
        active[0] = true;
        Ok(LikelihoodWorkspace {
            patterns,
            strata,
            active,
            n_persons,
        })
    }

    pub fn n_persons(&self) -> usize {
        self.n_persons
    }

    pub fn n_events(&self) -> usize {
        self.patterns.iter().map(|p| p.n_events).sum()
    }

    /// Crude log rate `ln(events / Σ (t1^a - t0^a))` ignoring covariates.
    pub fn crude_log_rate(&self, shape_a: f64) -> f64 {
        let exposure: f64 = self
            .patterns
            .iter()
            .flat_map(|p| p.ln_t0.iter().zip(&p.ln_t1))
            .map(|(&l0, &l1)| (shape_a * l1).exp() - (shape_a * l0).exp())
            .sum();
        ((self.n_events().max(1)) as f64 / exposure.max(f64::MIN_POSITIVE)).ln()
    }

    /// Survival coefficients whose indicator is non-zero for some participant.
    pub fn active_gamma(&self) -> [bool; N_GAMMA] {
        self.active
    }

    pub fn strata(&self) -> impl Iterator<Item = Stratum> + '_ {
        self.strata.keys().copied()
    }

    pub fn stratum_size(&self, s: Stratum) -> usize {
        self.strata.get(&s).map_or(0, |g| g.smoking.len())
    }

    /// Survival log-likelihood summed over participants.
    pub fn survival_loglik(&self, shape_a: f64, gamma: &SurvivalCoefficients) -> f64 {
        let ln_a = shape_a.ln();
        let mut total = 0.0;
        for p in &self.patterns {
            let ln_b: f64 = p.row.iter().zip(gamma.0.iter()).map(|(x, g)| x * g).sum();
            let mut exposure = 0.0;
            for (&l0, &l1) in p.ln_t0.iter().zip(&p.ln_t1) {
                exposure += (shape_a * l1).exp() - (shape_a * l0).exp();
            }
            total += p.n_events as f64 * (ln_a + ln_b) + (shape_a - 1.0) * p.sum_ln_t1_events - ln_b.exp() * exposure;
        }
        total
    }

    /// Survival log-likelihood and its gradient with respect to `ln a` and every gamma.
    pub fn survival_eval(&self, shape_a: f64, gamma: &SurvivalCoefficients) -> SurvivalEval {
        let ln_a = shape_a.ln();
        let mut out = SurvivalEval {
            loglik: 0.0,
            d_ln_a: 0.0,
            d_gamma: [0.0; N_GAMMA],
        };
        let mut d_a = 0.0;
        for p in &self.patterns {
            let ln_b: f64 = p.row.iter().zip(gamma.0.iter()).map(|(x, g)| x * g).sum();
            let b = ln_b.exp();
            let mut exposure = 0.0;
            let mut d_exposure = 0.0;
            for (&l0, &l1) in p.ln_t0.iter().zip(&p.ln_t1) {
                let t1a = (shape_a * l1).exp();
                let t0a = (shape_a * l0).exp();
                exposure += t1a - t0a;
                d_exposure += t1a * l1 - t0a * l0;
            }
            let ne = p.n_events as f64;
            out.loglik += ne * (ln_a + ln_b) + (shape_a - 1.0) * p.sum_ln_t1_events - b * exposure;
            let d_eta = ne - b * exposure;
            for (k, &x) in p.row.iter().enumerate() {
                out.d_gamma[k] += x * d_eta;
            }
            d_a += ne / shape_a + p.sum_ln_t1_events - b * d_exposure;
        }
        out.d_ln_a = shape_a * d_a;
        out
    }

    /// Bernoulli log-likelihood of the smoking statuses in one stratum.
    pub fn smoking_loglik(&self, stratum: Stratum, alpha0: f64, alpha1: f64) -> f64 {
        let Some(g) = self.strata.get(&stratum) else {
            return 0.0;
        };
        g.centered_birth
            .iter()
            .zip(&g.smoking)
            .map(|(&z, &y)| {
                let eta = alpha0 + alpha1 * z;
                if y {
                    log_logistic(eta)
                } else {
                    log_logistic(-eta)
                }
            })
            .sum()
    }

    /// Gradient of `smoking_loglik` in `(alpha0, alpha1)`.
    pub fn smoking_gradient(&self, stratum: Stratum, alpha0: f64, alpha1: f64) -> [f64; 2] {
        let Some(g) = self.strata.get(&stratum) else {
            return [0.0; 2];
        };
        let mut d = [0.0; 2];
        for (&z, &y) in g.centered_birth.iter().zip(&g.smoking) {
            let r = f64::from(u8::from(y)) - logistic(alpha0 + alpha1 * z);
            d[0] += r;
            d[1] += r * z;
        }
        d
    }

    /// Log-likelihood of all participants under `params`.
    pub fn loglik(&self, params: &ModelParams) -> Result<f64> {
        let mut total = self.survival_loglik(params.shape_a, &params.gamma);
        for &s in self.strata.keys() {
            let (a0, a1) = params.alpha(s)?;
            total += self.smoking_loglik(s, a0, a1);
        }
        Ok(total)
    }
}

/// `log_prior + loglik`; `-inf` when the shape is not positive.
pub fn log_posterior(params: &ModelParams, workspace: &LikelihoodWorkspace) -> Result<f64> {
    if !(params.shape_a > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_prior(params) + workspace.loglik(params)?)
}

/// Contribution of one participant, computed term by term (used as a reference).
pub fn record_loglik(record: &PersonRecord, params: &ModelParams) -> Result<f64> {
    let c = &record.covariates;
    let y = record
        .smoking
        .ok_or_else(|| Error::Domain(format!("record {} has no smoking status", record.id)))?;
    let fu = record
        .followup
        .ok_or_else(|| Error::Domain(format!("record {} has no follow-up", record.id)))?;
    let eta = smoking_logit(c, params)?;
    let smoke = if y { log_logistic(eta) } else { log_logistic(-eta) };
    let ln_b = linear_predictor_log_b(c, y, &params.gamma)?;
    let a = params.shape_a;
    let t0a = pow_time(c.age_at_baseline, a);
    let t1a = pow_time(fu.event_age, a);
    let surv = if fu.event_observed {
        event_term(a.ln(), a, ln_b, fu.event_age.max(1e-12).ln(), t0a, t1a)
    } else {
        censored_term(ln_b.exp(), t0a, t1a)
    };
    Ok(smoke + surv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Area, FollowUp, Gender, StudyYear};
    use crate::likelihood::{weibull_censored_loglik, weibull_event_loglik};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn person(id: &str, age: f64, area: Area, gender: Gender, year: StudyYear, y: bool, t1: f64, event: bool) -> PersonRecord {
        PersonRecord {
            id: id.into(),
            covariates: Covariates::new(age, area, gender, year),
            sampled: true,
            participated: true,
            smoking: Some(y),
            followup: Some(FollowUp {
                event_age: t1,
                event_observed: event,
            }),
            inclusion_probability: 0.01,
        }
    }

    fn random_records(n: usize, seed: u64) -> Vec<PersonRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let year = StudyYear::ALL[rng.random_range(0..6)];
                let area = [Area::ALL[0], Area::ALL[1]][rng.random_range(0..2)];
                let gender = if rng.random_bool(0.5) { Gender::Woman } else { Gender::Man };
                let age = rng.random_range(25.0..65.0);
                let event = rng.random_bool(0.2);
                let t1 = age + rng.random_range(0.5..25.0);
                person(&format!("p{i}"), age, area, gender, year, rng.random_bool(0.4), t1, event)
            })
            .collect()
    }

    fn params_for(ws: &LikelihoodWorkspace) -> ModelParams {
        let mut p = ModelParams::uniform(4.257, SurvivalCoefficients::finrisk_posterior_means(), ws.strata(), -0.8, 0.02);
        for (k, s) in ws.strata().enumerate() {
            p.set_alpha(s, -1.0 + 0.05 * k as f64, 0.01 - 0.001 * k as f64);
        }
        p
    }

    #[test]
    fn reported_linear_predictors() {
        let g = SurvivalCoefficients::finrisk_posterior_means();
        let nk = Area::from_code(2).unwrap();
        let man = Covariates::new(40.0, nk, Gender::Man, StudyYear::Y1972);
        let woman = Covariates::new(40.0, nk, Gender::Woman, StudyYear::Y1972);
        assert!((linear_predictor_log_b(&man, false, &g).unwrap() + 21.848).abs() < 1e-12);
        assert!((linear_predictor_log_b(&man, true, &g).unwrap() + 20.076).abs() < 1e-12);
        assert!((linear_predictor_log_b(&woman, true, &g).unwrap() + 20.869).abs() < 1e-12);
    }

    #[test]
    fn reported_smoking_probabilities_at_reference_birth_year() {
        let nk = Area::from_code(2).unwrap();
        let mut p = ModelParams::uniform(4.257, SurvivalCoefficients::default(), [], 0.0, 0.0);
        for (year, gender) in [(StudyYear::Y1972, Gender::Man), (StudyYear::Y1997, Gender::Woman)] {
            let (a0, a1) = ModelParams::finrisk_north_karelia_alpha(year, gender);
            p.set_alpha(Stratum::new(nk, year, gender), a0, a1);
        }
        // age chosen so the birth year is 1930
        let m = Covariates::new(42.0, nk, Gender::Man, StudyYear::Y1972);
        let w = Covariates::new(67.0, nk, Gender::Woman, StudyYear::Y1997);
        let expect_m = 1.0 / (1.0 + (-0.086f64).exp());
        let expect_w = 1.0 / (1.0 + 2.833f64.exp());
        assert!((smoking_probability(&m, &p).unwrap() - expect_m).abs() < 1e-12);
        assert!((smoking_probability(&w, &p).unwrap() - expect_w).abs() < 1e-12);
        assert!((expect_m - 0.5215).abs() < 1e-4 && (expect_w - 0.0556).abs() < 1e-4);
    }

    #[test]
    fn prior_term_count_and_shift() {
        let nk = Area::from_code(2).unwrap();
        let strata: Vec<Stratum> = StudyYear::ALL
            .iter()
            .flat_map(|&y| [Gender::Man, Gender::Woman].map(|g| Stratum::new(nk, y, g)))
            .collect();
        let p = ModelParams::uniform(1.0, SurvivalCoefficients::default(), strata, 0.0, 0.0);
        assert_eq!(prior_terms(&p).len(), 1 + N_GAMMA + 2 * 12);
        let mut q = p.clone();
        q.gamma.0[0] = PRIOR_VARIANCE.sqrt();
        assert!((log_prior(&p) - log_prior(&q) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_record_matches_hand_sum() {
        let nk = Area::from_code(2).unwrap();
        let r = person("x", 50.0, nk, Gender::Woman, StudyYear::Y1982, true, 61.5, true);
        let ws = LikelihoodWorkspace::from_participants(std::slice::from_ref(&r)).unwrap();
        let p = params_for(&ws);
        let s = r.covariates.stratum().unwrap();
        let (a0, a1) = p.alpha(s).unwrap();
        let eta = a0 + a1 * (1982.0 - 50.0 - 1930.0);
        let g = &p.gamma;
        let ln_b = g.intercept() + g.woman() + g.smoking() + g.woman_smoking() + g.year(StudyYear::Y1982) + g.woman_year(StudyYear::Y1982);
        let hand = (1.0 / (1.0 + (-eta).exp())).ln() + weibull_event_loglik(p.shape_a, ln_b.exp(), 50.0, 61.5).unwrap();
        assert!((ws.loglik(&p).unwrap() - hand).abs() < 1e-12);
        assert!((record_loglik(&r, &p).unwrap() - hand).abs() < 1e-12);
    }

    #[test]
    fn workspace_agrees_with_per_record_sum() {
        let records = random_records(400, 3);
        let ws = LikelihoodWorkspace::from_participants(&records).unwrap();
        let p = params_for(&ws);
        let direct: f64 = records.iter().map(|r| record_loglik(r, &p).unwrap()).sum();
        let fast = ws.loglik(&p).unwrap();
        assert!((fast - direct).abs() < 1e-9 * direct.abs(), "{fast} vs {direct}");
    }

    #[test]
    fn empty_workspace() {
        let ws = LikelihoodWorkspace::from_participants(&[]).unwrap();
        let p = ModelParams::uniform(2.0, SurvivalCoefficients::default(), [], 0.0, 0.0);
        assert_eq!(ws.loglik(&p).unwrap(), 0.0);
        assert_eq!(ws.n_persons(), 0);
        assert!((log_posterior(&p, &ws).unwrap() - log_prior(&p)).abs() < 1e-15);
    }

    #[test]
    fn duplicating_data_doubles_loglik() {
        let records = random_records(150, 5);
        let mut twice = records.clone();
        twice.extend(records.iter().cloned().map(|mut r| {
            r.id.push('b');
            r
        }));
        let ws1 = LikelihoodWorkspace::from_participants(&records).unwrap();
        let ws2 = LikelihoodWorkspace::from_participants(&twice).unwrap();
        let p = params_for(&ws1);
        let (l1, l2) = (ws1.loglik(&p).unwrap(), ws2.loglik(&p).unwrap());
        assert!((l2 - 2.0 * l1).abs() < 1e-9 * l1.abs());
    }

    #[test]
    fn permutation_invariant() {
        let records = random_records(200, 9);
        let mut rev = records.clone();
        rev.reverse();
        let ws1 = LikelihoodWorkspace::from_participants(&records).unwrap();
        let ws2 = LikelihoodWorkspace::from_participants(&rev).unwrap();
        let p = params_for(&ws1);
        let (l1, l2) = (ws1.loglik(&p).unwrap(), ws2.loglik(&p).unwrap());
        assert!((l1 - l2).abs() < 1e-10 * l1.abs());
    }

    #[test]
    fn nonparticipants_are_ignored() {
        let mut records = random_records(50, 1);
        let ws1 = LikelihoodWorkspace::from_participants(&records).unwrap();
        for r in records.iter_mut().take(10) {
            r.participated = false;
            r.smoking = None;
        }
        let ws2 = LikelihoodWorkspace::from_participants(&records).unwrap();
        assert_eq!(ws2.n_persons(), 40);
        assert_eq!(ws1.n_persons(), 50);
    }

    #[test]
    fn missing_area_is_an_error() {
        let mut records = random_records(3, 2);
        records[1].covariates.area = None;
        assert!(matches!(
            LikelihoodWorkspace::from_participants(&records),
            Err(Error::MissingArea(_))
        ));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let records = random_records(300, 11);
        let ws = LikelihoodWorkspace::from_participants(&records).unwrap();
        let p = params_for(&ws);
        let e = ws.survival_eval(p.shape_a, &p.gamma);
        assert!((e.loglik - ws.survival_loglik(p.shape_a, &p.gamma)).abs() < 1e-9 * e.loglik.abs());
        let h = 1e-6;
        let f = |ln_a: f64, g: &SurvivalCoefficients| ws.survival_loglik(ln_a.exp(), g);
        let ln_a = p.shape_a.ln();
        let fd = (f(ln_a + h, &p.gamma) - f(ln_a - h, &p.gamma)) / (2.0 * h);
        assert!((fd - e.d_ln_a).abs() < 1e-4 * fd.abs().max(1.0), "{fd} vs {}", e.d_ln_a);
        for k in 0..N_GAMMA {
            let (mut up, mut dn) = (p.gamma.clone(), p.gamma.clone());
            up.0[k] += h;
            dn.0[k] -= h;
            let fd = (f(ln_a, &up) - f(ln_a, &dn)) / (2.0 * h);
            assert!((fd - e.d_gamma[k]).abs() < 1e-4 * fd.abs().max(1.0), "gamma {k}: {fd} vs {}", e.d_gamma[k]);
        }
        let s = ws.strata().next().unwrap();
        let (a0, a1) = p.alpha(s).unwrap();
        let d = ws.smoking_gradient(s, a0, a1);
        let fd0 = (ws.smoking_loglik(s, a0 + h, a1) - ws.smoking_loglik(s, a0 - h, a1)) / (2.0 * h);
        let fd1 = (ws.smoking_loglik(s, a0, a1 + h) - ws.smoking_loglik(s, a0, a1 - h)) / (2.0 * h);
        assert!((fd0 - d[0]).abs() < 1e-5 && (fd1 - d[1]).abs() < 1e-4);
    }

    #[test]
    fn event_density_is_hazard_times_survival_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let a = rng.random_range(0.5..6.0);
            let b = (rng.random_range(-25.0..-2.0f64)).exp();
            let t0 = rng.random_range(20.0..70.0);
            let t1 = t0 + rng.random_range(0.1..30.0);
            let e = weibull_event_loglik(a, b, t0, t1).unwrap();
            let s = weibull_censored_loglik(a, b, t0, t1).unwrap();
            let h = crate::likelihood::weibull_log_hazard(a, b, t1);
            assert!((e - s - h).abs() < 1e-12 * e.abs().max(1.0));
        }
    }
}
