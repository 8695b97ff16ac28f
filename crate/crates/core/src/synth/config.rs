use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{AlphaEntry, Area, DesignSpec, ModelParams, SamplingScheme, Stratum, StudyYear, SurvivalCoefficients};
use crate::error::{Error, Result};

/// Calendar year at which registry follow-up ends by default.
pub const FOLLOW_UP_END: f64 = 2011.0;

const FINRISK_LIKE: &str = include_str!("../../presets/finrisk_like.toml");
const DESK: &str = include_str!("../../presets/desk.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaSize {
    pub area: Area,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeCap {
    pub area: Area,
    pub max_age: u32,
}

/// One simulated survey wave. The design starts from the historical layout of
/// `year` and the optional fields override parts of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub year: StudyYear,
    /// Population size of every area in this wave unless listed in `population`.
    pub population_per_area: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub population: Vec<AreaSize>,
    /// Years of follow-up after baseline; defaults to the time until 2011.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follow_up_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participation_rate: Option<f64>,
    /// Restricts the wave to these areas (in this order).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub areas: Option<Vec<Area>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub age_caps: Vec<AgeCap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SamplingScheme>,
}

impl WaveConfig {
    pub fn new(year: StudyYear, population_per_area: usize) -> Self {
        WaveConfig {
            year,
            population_per_area,
            population: Vec::new(),
            follow_up_years: None,
            sample_size: None,
            participation_rate: None,
            areas: None,
            age_caps: Vec::new(),
            scheme: None,
        }
    }

    pub fn follow_up(&self) -> f64 {
        self.follow_up_years
            .unwrap_or(FOLLOW_UP_END - f64::from(self.year.year()))
    }

    pub fn population_of(&self, area: Area) -> usize {
        self.population
            .iter()
            .find(|p| p.area == area)
            .map_or(self.population_per_area, |p| p.size)
    }

    /// The design after applying overrides. Areas are not checked here.
    pub fn design(&self) -> DesignSpec {
        let mut d = DesignSpec::finrisk(self.year);
        if let Some(areas) = &self.areas {
            let reference = d.areas.clone();
            let default = reference[0];
            d.areas = areas
                .iter()
                .map(|&a| {
                    reference.iter().copied().find(|e| e.area == a).unwrap_or(crate::domain::AreaEligibility {
                        area: a,
                        ..default
                    })
                })
                .collect();
        }
        for cap in &self.age_caps {
            d = d.with_age_cap(cap.area, cap.max_age);
        }
        if let Some(n) = self.sample_size {
            d.target_sample_size = n;
        }
        if let Some(r) = self.participation_rate {
            d.target_participation_rate = r;
        }
        if let Some(s) = self.scheme {
            d.scheme = s;
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmokingBase {
    /// Coefficients reported for North Karelia, used for every area.
    #[default]
    Reported,
    /// The same `(alpha0, alpha1)` in every stratum.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmokingTruth {
    #[serde(default)]
    pub base: SmokingBase,
    #[serde(default)]
    pub alpha0: f64,
    #[serde(default)]
    pub alpha1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<AlphaEntry>,
}

fn reported_gamma() -> SurvivalCoefficients {
    SurvivalCoefficients::finrisk_posterior_means()
}

fn reported_shape() -> f64 {
    4.257
}

/// True model parameters. Unlisted survival coefficients are zero when
/// `gamma` is given and the reported posterior means when it is omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthParams {
    #[serde(default = "reported_shape")]
    pub shape_a: f64,
    #[serde(default = "reported_gamma")]
    pub gamma: SurvivalCoefficients,
    #[serde(default)]
    pub smoking: SmokingTruth,
}

impl Default for TruthParams {
    fn default() -> Self {
        TruthParams {
            shape_a: reported_shape(),
            gamma: reported_gamma(),
            smoking: SmokingTruth::default(),
        }
    }
}

impl TruthParams {
    pub fn model_params(&self, strata: &[Stratum]) -> ModelParams {
        let mut p = ModelParams::uniform(self.shape_a, self.gamma, [], 0.0, 0.0);
        for &s in strata {
            let (a0, a1) = match self.smoking.base {
                SmokingBase::Reported => ModelParams::finrisk_north_karelia_alpha(s.year, s.gender),
                SmokingBase::Constant => (self.smoking.alpha0, self.smoking.alpha1),
            };
            p.set_alpha(s, a0, a1);
        }
        for e in &self.smoking.overrides {
            p.set_alpha(Stratum::new(e.area, e.year, e.gender), e.alpha0, e.alpha1);
        }
        p
    }
}

/// Logistic participation model on age in years, woman indicator, true smoking
/// and whether onset is observed during follow-up. With `beta_smoking = 0`
/// smoking is independent of participation given covariates and follow-up,
/// even when `beta_event` makes smokers participate less.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipationConfig {
    #[serde(default)]
    pub beta0: f64,
    #[serde(default)]
    pub beta_age: f64,
    #[serde(default)]
    pub beta_gender: f64,
    #[serde(default)]
    pub beta_smoking: f64,
    #[serde(default)]
    pub beta_event: f64,
    /// Re-solve `beta0` per wave so the expected participation rate among the
    /// sampled equals the wave's target rate.
    #[serde(default = "yes")]
    pub calibrate: bool,
}

fn yes() -> bool {
    true
}

impl Default for ParticipationConfig {
    fn default() -> Self {
        ParticipationConfig {
            beta0: 0.0,
            beta_age: 0.0,
            beta_gender: 0.0,
            beta_smoking: 0.0,
            beta_event: 0.0,
            calibrate: true,
        }
    }
}

/// Deaths from other causes, censoring follow-up before the administrative end.
/// Exponential with `rate` per year, multiplied by `smoker_hazard_ratio` for smokers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetingMortality {
    pub rate: f64,
    #[serde(default = "one")]
    pub smoker_hazard_ratio: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub waves: Vec<WaveConfig>,
    #[serde(default)]
    pub truth: TruthParams,
    #[serde(default)]
    pub participation: ParticipationConfig,
    /// Probability that a 1972 or 1977 non-participant's area is unrecorded.
    #[serde(default)]
    pub area_loss_rate: f64,
    /// Also emit non-sampled persons in the observed dataset.
    #[serde(default)]
    pub emit_unsampled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competing_mortality: Option<CompetingMortality>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Bundled scenarios: `finrisk-like` (all six waves at historical sample
    /// sizes) and `desk` (two small waves).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "finrisk-like" | "finrisk_like" => ScenarioConfig::from_toml(FINRISK_LIKE),
            "desk" => ScenarioConfig::from_toml(DESK),
            other => Err(Error::Config(format!("unknown scenario preset {other:?}"))),
        }
    }

    pub fn designs(&self) -> Vec<DesignSpec> {
        self.waves.iter().map(WaveConfig::design).collect()
    }

    /// Smoking strata covered by the waves, sorted.
    pub fn strata(&self) -> Vec<Stratum> {
        crate::domain::strata_of(&self.designs())
    }

    pub fn model_params(&self) -> ModelParams {
        self.truth.model_params(&self.strata())
    }

    pub fn validate(&self) -> Result<()> {
        if self.waves.is_empty() {
            return Err(Error::Config("scenario has no waves".into()));
        }
        let mut years = BTreeSet::new();
        for w in &self.waves {
            if !years.insert(w.year) {
                return Err(Error::Config(format!("wave {} listed twice", w.year)));
            }
            let d = w.design();
            d.validate()?;
            d.check_against_history()?;
            for e in &d.areas {
                if w.population_of(e.area) == 0 {
                    return Err(Error::Config(format!("wave {} area {} has zero population", w.year, e.area)));
                }
            }
            for p in &w.population {
                if !d.has_area(p.area) {
                    return Err(Error::AreaNotInWave { area: p.area, year: w.year });
                }
            }
            for c in &w.age_caps {
                if !d.has_area(c.area) {
                    return Err(Error::AreaNotInWave { area: c.area, year: w.year });
                }
            }
            let f = w.follow_up();
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::Config(format!("wave {} follow-up {f} must be non-negative", w.year)));
            }
        }
        if !(self.truth.shape_a > 0.0 && self.truth.shape_a.is_finite()) {
            return Err(Error::Config(format!("shape_a must be positive, got {}", self.truth.shape_a)));
        }
        if self.truth.gamma.0.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("survival coefficients must be finite".into()));
        }
        let strata = self.strata();
        for e in &self.truth.smoking.overrides {
            let s = Stratum::new(e.area, e.year, e.gender);
            if strata.binary_search(&s).is_err() {
                return Err(Error::Config(format!("smoking override for stratum {s} which no wave simulates")));
            }
        }
        let p = &self.participation;
        if [p.beta0, p.beta_age, p.beta_gender, p.beta_smoking, p.beta_event].iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("participation coefficients must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.area_loss_rate) {
            return Err(Error::Config(format!("area loss rate {} outside [0, 1]", self.area_loss_rate)));
        }
        if let Some(m) = &self.competing_mortality {
            if !(m.rate >= 0.0 && m.smoker_hazard_ratio > 0.0) {
                return Err(Error::Config("competing mortality needs rate >= 0 and a positive hazard ratio".into()));
            }
        }
        self.model_params().validate(&strata)
    }
}
