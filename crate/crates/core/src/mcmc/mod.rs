//! Blocked adaptive random-walk Metropolis over several independent chains,
//! with split-chain R̂, effective sample sizes and posterior summaries.

mod diagnostics;
mod init;
pub mod linalg;
mod sampler;
mod summary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use diagnostics::{bgr_diagnostic, effective_sample_size, split_rhat, DiagnosticsReport, RHat};
pub use init::{find_block_mode, BlockMode, InitStrategy};
pub use sampler::{run_chains, ChainStats, McmcRun};
pub use summary::{posterior_summary, write_summary_csv, SummaryRow};

/// A group of coordinates updated jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub indices: Vec<usize>,
}

/// A log density that splits into per-block terms.
///
/// The log density equals `Σ_b block_log_density(b, x)`, and block `b`'s term
/// may only read the coordinates in `blocks()[b]`. Targets that do not factor
/// this way should expose a single block.
pub trait BlockTarget: Sync {
    fn dim(&self) -> usize;

    fn blocks(&self) -> Vec<Block>;

    fn block_log_density(&self, block: usize, x: &[f64]) -> f64;

    /// Gradient of the block term with respect to the block's coordinates, if available.
    fn block_gradient(&self, _block: usize, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (0..self.blocks().len()).map(|b| self.block_log_density(b, x)).sum()
    }

    /// Labels of the values produced by `output`.
    fn output_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    /// Maps a sampler state to the stored draw (e.g. back-transforming a log scale).
    fn output(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub adaptation_window: usize,
    pub target_acceptance: f64,
    /// Proposal standard deviation per coordinate when the initializer supplies no covariance.
    pub initial_scale: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig::paper()
    }
}

impl McmcConfig {
    /// Eight chains of 200 000 iterations, 40 000 burn-in, every 250th kept.
    pub fn paper() -> Self {
        McmcConfig {
            n_chains: 8,
            iterations: 200_000,
            burn_in: 40_000,
            thinning: 250,
            seed: 1,
            adaptation_window: 100,
            target_acceptance: 0.234,
            initial_scale: 0.1,
        }
    }

    /// Four chains of 25 000 iterations, 5 000 burn-in, every 20th kept.
    pub fn desk() -> Self {
        McmcConfig {
            n_chains: 4,
            iterations: 25_000,
            burn_in: 5_000,
            thinning: 20,
            ..McmcConfig::paper()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(McmcConfig::paper()),
            "desk" => Ok(McmcConfig::desk()),
            other => Err(Error::Config(format!("unknown MCMC profile {other:?} (expected paper or desk)"))),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning interval must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if (self.iterations - self.burn_in) % self.thinning != 0 {
            return Err(Error::Config(format!(
                "post burn-in length {} is not divisible by thinning {}",
                self.iterations - self.burn_in,
                self.thinning
            )));
        }
        if self.adaptation_window == 0 {
            return Err(Error::Config("adaptation window must be positive".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config("target acceptance must be in (0, 1)".into()));
        }
        if !(self.initial_scale > 0.0) {
            return Err(Error::Config("initial proposal scale must be positive".into()));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }

    pub fn retained_total(&self) -> usize {
        self.n_chains * self.retained_per_chain()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_profile_keeps_5120() {
        let c = McmcConfig::paper();
        c.validate().unwrap();
        assert_eq!(c.retained_per_chain(), 640);
        assert_eq!(c.retained_total(), 5120);
        assert_eq!(McmcConfig::desk().retained_total(), 4000);
    }

    #[test]
    fn invalid_configs() {
        let mut c = McmcConfig::desk();
        c.burn_in = c.iterations;
        assert!(c.validate().is_err());
        let mut c = McmcConfig::desk();
        c.thinning = 7;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn retained_count_formula(chains in 1usize..10, per in 1usize..50, thin in 1usize..20, burn in 0usize..500) {
            let c = McmcConfig {
                n_chains: chains,
                iterations: burn + per * thin,
                burn_in: burn,
                thinning: thin,
                ..McmcConfig::desk()
            };
            prop_assert!(c.validate().is_ok());
            prop_assert_eq!(c.retained_total(), chains * per);
        }
    }
}
