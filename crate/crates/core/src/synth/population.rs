use rand::Rng;
use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::truth::TruthRecord;
use crate::domain::{Covariates, Gender};
use crate::error::Result;
use crate::likelihood::{linear_predictor_log_b, sample_truncated, smoking_probability};
use crate::rng;

struct Slot {
    wave: usize,
    area_pos: usize,
    k: usize,
}

/// Draws every wave's population: age uniform over the area's eligible range,
/// gender with probability one half, smoking from the logistic model and onset
/// age from the Weibull truncated at baseline, then censoring at the end of
/// follow-up. Person `i` uses its own random stream, so the result does not
/// depend on thread count.
pub fn generate_population(config: &ScenarioConfig) -> Result<Vec<TruthRecord>> {
    config.validate()?;
    let params = config.model_params();
    let designs = config.designs();
    let mut slots = Vec::new();
    for (w, (wave, design)) in config.waves.iter().zip(&designs).enumerate() {
        for (pos, e) in design.areas.iter().enumerate() {
            slots.extend((0..wave.population_of(e.area)).map(|k| Slot { wave: w, area_pos: pos, k }));
        }
    }
    let a = params.shape_a;
    slots
        .par_iter()
        .enumerate()
        .map(|(i, slot)| {
            let wave = &config.waves[slot.wave];
            let e = designs[slot.wave].areas[slot.area_pos];
            let mut r = rng::stream(config.seed, rng::domain::POPULATION, i as u64);
            let age = e.lower() + r.random::<f64>() * (e.upper_exclusive() - e.lower());
            // guard the open upper end against rounding
            let age = if age < e.upper_exclusive() { age } else { e.lower() };
            let gender = if r.random::<f64>() < 0.5 { Gender::Man } else { Gender::Woman };
            let covariates = Covariates::new(age, e.area, gender, wave.year);
            let smoking = r.random::<f64>() < smoking_probability(&covariates, &params)?;
            let b = linear_predictor_log_b(&covariates, smoking, &params.gamma)?.exp();
            let u: f64 = 1.0 - r.random::<f64>();
            let event_age = sample_truncated(a, b, age, u);
            let mut censor_age = age + wave.follow_up();
            if let Some(m) = &config.competing_mortality {
                let rate = m.rate * if smoking { m.smoker_hazard_ratio } else { 1.0 };
                if rate > 0.0 {
                    let v: f64 = 1.0 - r.random::<f64>();
                    censor_age = censor_age.min(age - v.ln() / rate);
                }
            }
            Ok(TruthRecord {
                id: format!("{}-{}-{:06}", wave.year, e.area.code(), slot.k),
                covariates,
                smoking,
                event_age,
                censor_age,
                sampled: false,
                participated: false,
                inclusion_probability: 0.0,
            })
        })
        .collect()
}
