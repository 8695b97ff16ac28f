//! Synthetic cohorts with known truth: population generation, wave sampling,
//! smoking-dependent participation and masking of what a survey would not see.

mod config;
mod mask;
mod participation;
mod population;
mod sampling;
mod truth;

pub use config::{
    AgeCap, AreaSize, CompetingMortality, ParticipationConfig, ScenarioConfig, SmokingBase, SmokingTruth, TruthParams,
    WaveConfig,
};
pub use mask::mask;
pub use participation::{apply_participation, calibrate_intercept, participation_probability};
pub use population::generate_population;
pub use sampling::{draw_sample, SampleDraw, Shortfall};
pub use truth::{read_truth, write_truth, TruthRecord, TRUTH_COLUMNS};

use serde::{Deserialize, Serialize};

use crate::domain::{PersonRecord, StudyYear};
use crate::error::Result;

/// Per-wave counts from one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveReport {
    pub year: StudyYear,
    pub population: usize,
    pub sampled: usize,
    pub participants: usize,
    /// Participation intercept actually used (after calibration, if enabled).
    pub beta0: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: Vec<TruthRecord>,
    pub observed: Vec<PersonRecord>,
    pub shortfalls: Vec<Shortfall>,
    pub waves: Vec<WaveReport>,
}

/// Runs the whole generator: population, sampling and participation per wave,
/// then masking. Deterministic in `config.seed`.
pub fn simulate(config: &ScenarioConfig) -> Result<Simulation> {
    config.validate()?;
    let mut truth = generate_population(config)?;
    let designs = config.designs();
    let mut shortfalls = Vec::new();
    let mut waves = Vec::new();
    for design in &designs {
        let draw = draw_sample(&truth, design, config.seed)?;
        for (&i, &p) in draw.members.iter().zip(&draw.inclusion_probability) {
            truth[i].inclusion_probability = p;
            truth[i].sampled = false;
        }
        for &i in &draw.selected {
            truth[i].sampled = true;
        }
        shortfalls.extend(draw.shortfalls);
        let beta0 = apply_participation(&mut truth, design, &config.participation, config.seed);
        waves.push(WaveReport {
            year: design.year,
            population: draw.members.len(),
            sampled: draw.selected.len(),
            participants: truth
                .iter()
                .filter(|t| t.covariates.study_year == design.year && t.participated)
                .count(),
            beta0,
        });
    }
    for s in &shortfalls {
        log::warn!("stratum {} quota {} exceeds {} eligible persons", s.stratum, s.quota, s.available);
    }
    let observed = mask(&truth, config.area_loss_rate, config.seed, config.emit_unsampled);
    Ok(Simulation {
        truth,
        observed,
        shortfalls,
        waves,
    })
}
