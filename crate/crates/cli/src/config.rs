//! Pipeline configuration: one TOML file with a section per stage.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mnar_core::impute::{AreaProbabilities, CensoredMode};
use mnar_core::mcmc::McmcConfig;
use mnar_core::prevalence::PrevalenceOptions;
use mnar_core::synth::ScenarioConfig;
use mnar_core::StandardizationTable;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed. When set it replaces the seeds of every stage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// MCMC profile, `paper` or `desk`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    /// Worker threads; does not change any output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub simulate: SimulateSection,
    pub fit: FitSection,
    pub impute: ImputeSection,
    pub estimate: EstimateSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// Bundled scenario, used when `scenario` is absent.
    pub preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    /// Also write the unmasked truth file.
    pub write_truth: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            preset: "desk".into(),
            scenario: None,
            write_truth: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Explicit sampler settings; otherwise taken from the profile.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc: Option<McmcConfig>,
    /// Every R̂ must be below this for the fit to count as converged.
    pub rhat_threshold: f64,
    /// Spread of chain starts around the Laplace mode, in posterior standard deviations.
    pub overdispersion: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            mcmc: None,
            rhat_threshold: 1.05,
            overdispersion: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeFormat {
    /// Only the imputed values, one row per record and dataset.
    #[default]
    Long,
    /// The long file plus one complete dataset file per imputation.
    Datasets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_imputations: Option<usize>,
    pub censored_mode: CensoredMode,
    pub area: AreaProbabilities,
    pub keep_probabilities: bool,
    pub format: ImputeFormat,
    /// Impute from draws whose fit did not converge.
    pub allow_unconverged: bool,
}

impl Default for ImputeSection {
    fn default() -> Self {
        ImputeSection {
            seed: None,
            n_imputations: None,
            censored_mode: CensoredMode::default(),
            area: AreaProbabilities::default(),
            keep_probabilities: false,
            format: ImputeFormat::default(),
            allow_unconverged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    /// Band edges of an equal-weight table, used when `standardization` is absent.
    pub bands: Vec<f64>,
    /// `lower,upper,weight` or `lower,upper,population` file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardization: Option<PathBuf>,
    pub min_effective_n: f64,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection {
            bands: vec![25.0, 35.0, 45.0, 55.0, 65.0, 75.0],
            standardization: None,
            min_effective_n: PrevalenceOptions::default().min_effective_n,
        }
    }
}

impl EstimateSection {
    pub fn table(&self) -> Result<StandardizationTable> {
        Ok(match &self.standardization {
            Some(p) => StandardizationTable::read_csv(p).with_context(|| format!("reading {}", p.display()))?,
            None => StandardizationTable::uniform(&self.bands)?,
        })
    }

    pub fn options(&self) -> PrevalenceOptions {
        PrevalenceOptions {
            min_effective_n: self.min_effective_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Survey year to tabulate; the latest year in the trend when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<u16>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub profile: Option<String>,
    pub threads: Option<usize>,
}

/// Fully resolved settings: the scenario and sampler are explicit and every
/// stage seed is filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub scenario: ScenarioConfig,
    pub mcmc: McmcConfig,
    pub impute_seed: u64,
    pub threads: Option<usize>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        PipelineConfig::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(mut self, o: &Overrides) -> Result<Resolved> {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.profile.is_some() {
            self.profile = o.profile.clone();
        }
        let threads = o.threads.or(self.threads);
        if threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        let mut scenario = match &self.simulate.scenario {
            Some(s) => s.clone(),
            None => ScenarioConfig::preset(&self.simulate.preset)?,
        };
        let profile = self.profile.clone().unwrap_or_else(|| "desk".into());
        let mut mcmc = match &self.fit.mcmc {
            Some(m) => m.clone(),
            None => McmcConfig::profile(&profile)?,
        };
        let master = self.seed.unwrap_or(scenario.seed);
        if self.seed.is_some() {
            scenario.seed = master;
            mcmc.seed = master;
        } else if self.fit.mcmc.is_none() {
            mcmc.seed = master;
        }
        let impute_seed = match (self.seed, self.impute.seed) {
            (Some(s), _) => s,
            (None, Some(s)) => s,
            (None, None) => master,
        };
        scenario.validate()?;
        mcmc.validate()?;
        if mcmc.n_chains < 2 {
            bail!("convergence diagnostics require at least 2 chains; the fit is configured with {}", mcmc.n_chains);
        }
        if !(self.fit.rhat_threshold > 1.0) {
            bail!("rhat_threshold must exceed 1, got {}", self.fit.rhat_threshold);
        }
        if !(self.fit.overdispersion >= 0.0) {
            bail!("overdispersion must be non-negative");
        }
        if let Some(n) = self.impute.n_imputations {
            if n < 2 {
                bail!("n_imputations must be at least 2 for credible intervals, got {n}");
            }
        }
        self.impute.area.validate()?;
        self.estimate.table()?;
        Ok(Resolved {
            config: self,
            scenario,
            mcmc,
            impute_seed,
            threads,
        })
    }
}

impl Resolved {
    /// The explicit configuration that reproduces this run. Thread counts are
    /// left out since they never change results.
    pub fn to_config(&self) -> PipelineConfig {
        let mut c = self.config.clone();
        c.seed = None;
        c.profile = None;
        c.threads = None;
        c.simulate.scenario = Some(self.scenario.clone());
        c.fit.mcmc = Some(self.mcmc.clone());
        c.impute.seed = Some(self.impute_seed);
        c
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.to_config())?)
    }

    /// SHA-256 of the resolved TOML.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_config_is_a_fixed_point() {
        let r = PipelineConfig::default()
            .resolve(&Overrides {
                seed: Some(11),
                ..Overrides::default()
            })
            .unwrap();
        assert_eq!(r.scenario.seed, 11);
        assert_eq!(r.mcmc.seed, 11);
        let again = PipelineConfig::from_toml(&r.to_toml().unwrap())
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap();
        assert_eq!(again.hash().unwrap(), r.hash().unwrap());
        assert_eq!(again.mcmc, r.mcmc);
    }

    #[test]
    fn flags_override_file() {
        let c = PipelineConfig::from_toml("seed = 3\nprofile = \"paper\"\n").unwrap();
        let r = c
            .clone()
            .resolve(&Overrides {
                profile: Some("desk".into()),
                ..Overrides::default()
            })
            .unwrap();
        assert_eq!(r.mcmc.iterations, McmcConfig::desk().iterations);
        assert_eq!(r.mcmc.seed, 3);
        let r = c.resolve(&Overrides::default()).unwrap();
        assert_eq!(r.mcmc.retained_total(), 5120);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(PipelineConfig::from_toml("sead = 3\n").is_err());
        let one_chain = PipelineConfig::from_toml("[fit.mcmc]\nn_chains = 1\n").unwrap();
        let e = one_chain.resolve(&Overrides::default()).unwrap_err();
        assert!(format!("{e:#}").contains("at least 2 chains"));
        assert!(PipelineConfig::default()
            .resolve(&Overrides {
                profile: Some("fast".into()),
                ..Overrides::default()
            })
            .is_err());
    }
}
