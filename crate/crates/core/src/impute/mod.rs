//! Posterior-predictive imputation of non-participants' smoking status, and of
//! the area of 1972/1977 non-participants whose area was not recorded.

mod area;
mod bayes;
mod io;

pub use area::{impute_area, AreaProbabilities};
pub use io::{read_imputations, write_imputations, IMPUTATION_COLUMNS};
pub use bayes::{
    draw_event_time_mixture, impute_status, posterior_from_parts, smoking_posterior_prob, CensoredMode, PROB_EPS,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Area, PersonRecord, PosteriorDraws};
use crate::error::{Error, Result};
use crate::likelihood::params_from_named;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeConfig {
    pub seed: u64,
    /// Number of imputed datasets; `None` uses every retained draw. A subsample
    /// takes evenly spaced draws.
    pub n_imputations: Option<usize>,
    pub censored_mode: CensoredMode,
    pub area: AreaProbabilities,
    /// Keep each non-participant's smoking probability alongside the draw.
    pub keep_probabilities: bool,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig {
            seed: 1,
            n_imputations: None,
            censored_mode: CensoredMode::Conditioned,
            area: AreaProbabilities::default(),
            keep_probabilities: false,
        }
    }
}

/// Imputed values for one posterior draw, aligned with [`Imputation::targets`]
/// and [`Imputation::area_targets`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDataset {
    /// Row of the posterior draw file used.
    pub draw_index: usize,
    /// Index of the random streams (`IMPUTE_AREA`, `IMPUTE_SMOKING`) used.
    pub stream: u64,
    pub smoking: Vec<bool>,
    pub areas: Vec<Area>,
    /// `P(Y = 1 | T, X)` per target; empty unless requested.
    pub probabilities: Vec<f64>,
}

/// The set of imputed datasets over one base dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    /// Indices of sampled non-participants in the base dataset.
    pub targets: Vec<usize>,
    /// Indices of records whose area is filled in each dataset.
    pub area_targets: Vec<usize>,
    pub datasets: Vec<ImputedDataset>,
}

impl Imputation {
    /// Base records with dataset `k`'s imputed values filled in.
    pub fn materialize(&self, base: &[PersonRecord], k: usize) -> Vec<PersonRecord> {
        let mut out = base.to_vec();
        let d = &self.datasets[k];
        for (&i, &a) in self.area_targets.iter().zip(&d.areas) {
            out[i].covariates.area = Some(a);
        }
        for (&i, &y) in self.targets.iter().zip(&d.smoking) {
            out[i].smoking = Some(y);
        }
        out
    }
}

/// Evenly spaced draw rows: all of them when `wanted` is `None` or too large.
pub fn select_draws(n_draws: usize, wanted: Option<usize>) -> Vec<usize> {
    match wanted {
        Some(m) if m < n_draws => (0..m).map(|k| k * n_draws / m).collect(),
        _ => (0..n_draws).collect(),
    }
}

fn check_records(records: &[PersonRecord]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut targets = Vec::new();
    let mut area_targets = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if !r.sampled {
            continue;
        }
        if r.followup.is_none() {
            return Err(Error::Domain(format!("sampled record {} has no follow-up", r.id)));
        }
        if r.covariates.area.is_none() {
            if r.participated || !r.covariates.study_year.has_area_loss() {
                return Err(Error::Domain(format!(
                    "record {} ({}) has no area; only 1972/1977 non-participants may",
                    r.id, r.covariates.study_year
                )));
            }
            area_targets.push(i);
        }
        if !r.participated {
            targets.push(i);
        } else if r.smoking.is_none() {
            return Err(Error::Domain(format!("participant {} has no smoking status", r.id)));
        }
    }
    Ok((targets, area_targets))
}

/// One imputed dataset per selected posterior draw. Dataset `k` draws its areas
/// and smoking statuses from streams indexed by `k`, so the result is the same
/// for any thread count. Participants are left untouched.
pub fn impute_smoking(draws: &PosteriorDraws, records: &[PersonRecord], config: &ImputeConfig) -> Result<Imputation> {
    config.area.validate()?;
    let (targets, area_targets) = check_records(records)?;
    let rows = select_draws(draws.n_draws(), config.n_imputations);
    let names = draws.parameter_names();
    let datasets = rows
        .par_iter()
        .enumerate()
        .map(|(k, &row)| {
            let params = params_from_named(names, draws.row(row))?;
            let stream = k as u64;
            let mut area_rng = rng::stream(config.seed, rng::domain::IMPUTE_AREA, stream);
            let areas: Vec<Area> = area_targets
                .iter()
                .map(|&i| config.area.draw(records[i].covariates.study_year, &mut area_rng))
                .collect::<Result<_>>()?;
            let mut filled = std::collections::HashMap::with_capacity(areas.len());
            for (&i, &a) in area_targets.iter().zip(&areas) {
                filled.insert(i, a);
            }
            let mut smoke_rng = rng::stream(config.seed, rng::domain::IMPUTE_SMOKING, stream);
            let mut smoking = Vec::with_capacity(targets.len());
            let mut probabilities = Vec::new();
            for &i in &targets {
                let r = &records[i];
                let mut cov = r.covariates;
                if let Some(&a) = filled.get(&i) {
                    cov.area = Some(a);
                }
                let fu = r.followup.expect("checked above");
                smoking.push(impute_status(&params, &cov, &fu, config.censored_mode, &mut smoke_rng)?);
                if config.keep_probabilities {
                    probabilities.push(smoking_posterior_prob(&params, &cov, &fu)?);
                }
            }
            Ok(ImputedDataset {
                draw_index: row,
                stream,
                smoking,
                areas,
                probabilities,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Imputation {
        targets,
        area_targets,
        datasets,
    })
}
