use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::init::{initialize, InitStrategy};
use super::linalg::{cholesky, lower_mul, RunningCov};
use super::{BlockTarget, McmcConfig};
use crate::domain::{PosteriorDraws, RunMeta};
use crate::error::{Error, Result};
use crate::rng;

/// Per-chain acceptance bookkeeping after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats {
    pub block_acceptance: Vec<f64>,
    /// Adaptation windows during burn-in in which no proposal of some block was accepted.
    pub rejected_windows: usize,
}

impl ChainStats {
    pub fn acceptance(&self) -> f64 {
        self.block_acceptance.iter().sum::<f64>() / self.block_acceptance.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct McmcRun {
    pub draws: PosteriorDraws,
    pub chains: Vec<ChainStats>,
    pub block_names: Vec<String>,
}

struct BlockState {
    indices: Vec<usize>,
    chol: Vec<f64>,
    log_scale: f64,
    current: f64,
    adapted_cov: bool,
    window_accepts: usize,
    accepts_after_burn: usize,
    history: RunningCov,
}

impl BlockState {
    fn dim(&self) -> usize {
        self.indices.len()
    }
}

fn scaled_chol(cov: &[f64], d: usize) -> Option<Vec<f64>> {
    let s = 2.38 * 2.38 / d as f64;
    let mean_diag = (0..d).map(|i| cov[i * d + i]).sum::<f64>() / d as f64;
    let mut m: Vec<f64> = cov.iter().map(|v| v * s).collect();
    for i in 0..d {
        m[i * d + i] += 1e-10 * s * mean_diag.max(1e-300);
    }
    cholesky(&m, d)
}

/// Runs `config.n_chains` chains in parallel. Each chain owns the random
/// stream `(seed, chain index)`, so output does not depend on the thread count.
/// Proposals adapt only during burn-in.
pub fn run_chains<T: BlockTarget + ?Sized>(target: &T, init: &InitStrategy, config: &McmcConfig) -> Result<McmcRun> {
    config.validate()?;
    let blocks = target.blocks();
    if blocks.is_empty() {
        return Err(Error::Precondition("target has no blocks".into()));
    }
    let init = initialize(target, init, config.n_chains, config.seed)?;
    for start in &init.starts {
        for (b, blk) in blocks.iter().enumerate() {
            if !target.block_log_density(b, start).is_finite() {
                return Err(Error::BadInitialPoint { block: blk.name.clone() });
            }
        }
    }

    let results: Vec<(Vec<Vec<f64>>, ChainStats)> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_one(target, &init.starts[c], &init.block_cov, config, c))
        .collect();

    let names = target.output_names();
    let retained = config.retained_per_chain();
    let mut values = Vec::with_capacity(config.n_chains * retained * names.len());
    let mut chain = Vec::with_capacity(config.n_chains * retained);
    let mut stats = Vec::with_capacity(config.n_chains);
    for (c, (rows, s)) in results.into_iter().enumerate() {
        for row in rows {
            values.extend(row);
            chain.push(c);
        }
        if s.rejected_windows > 0 {
            log::warn!(
                "chain {c}: {} adaptation windows rejected every proposal of a block; scale was shrunk",
                s.rejected_windows
            );
        }
        stats.push(s);
    }
    let meta = RunMeta {
        n_chains: config.n_chains,
        iterations: config.iterations,
        burn_in: config.burn_in,
        thinning: config.thinning,
        seed: config.seed,
    };
    Ok(McmcRun {
        draws: PosteriorDraws::new(names, values, chain, meta)?,
        chains: stats,
        block_names: blocks.into_iter().map(|b| b.name).collect(),
    })
}

fn run_one<T: BlockTarget + ?Sized>(
    target: &T,
    start: &[f64],
    block_cov: &[Option<Vec<f64>>],
    config: &McmcConfig,
    chain: usize,
) -> (Vec<Vec<f64>>, ChainStats) {
    let mut rng: ChaCha8Rng = rng::stream(config.seed, rng::domain::CHAIN, chain as u64);
    let mut x = start.to_vec();
    let mut states: Vec<BlockState> = target
        .blocks()
        .into_iter()
        .enumerate()
        .map(|(b, blk)| {
            let d = blk.indices.len();
            let from_init = block_cov[b].as_ref().and_then(|c| scaled_chol(c, d));
            let adapted = from_init.is_some();
            let chol = from_init.unwrap_or_else(|| {
                let mut l = vec![0.0; d * d];
                (0..d).for_each(|i| l[i * d + i] = config.initial_scale);
                l
            });
            BlockState {
                current: target.block_log_density(b, &x),
                indices: blk.indices,
                chol,
                log_scale: 0.0,
                adapted_cov: adapted,
                window_accepts: 0,
                accepts_after_burn: 0,
                history: RunningCov::new(d),
            }
        })
        .collect();

    let window = config.adaptation_window;
    let history_start = config.burn_in / 5;
    let history_reset = config.burn_in / 2;
    let mut rounds = 0usize;
    let mut rejected_windows = 0usize;
    let mut kept = Vec::with_capacity(config.retained_per_chain());
    let mut proposal = x.clone();

    for iter in 0..config.iterations {
        for (b, st) in states.iter_mut().enumerate() {
            let d = st.dim();
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let step = lower_mul(&st.chol, d, &z);
            let scale = st.log_scale.exp();
            proposal.copy_from_slice(&x);
            for (k, &i) in st.indices.iter().enumerate() {
                proposal[i] += scale * step[k];
            }
            let cand = target.block_log_density(b, &proposal);
            let u: f64 = rng.random();
            if cand.is_finite() && u.ln() < cand - st.current {
                for &i in &st.indices {
                    x[i] = proposal[i];
                }
                st.current = cand;
                if iter < config.burn_in {
                    st.window_accepts += 1;
                } else {
                    st.accepts_after_burn += 1;
                }
            }
            if iter >= history_start && iter < config.burn_in {
                let v: Vec<f64> = st.indices.iter().map(|&i| x[i]).collect();
                st.history.push(&v);
            }
        }

        if iter < config.burn_in {
            if iter + 1 == history_reset {
                states.iter_mut().for_each(|s| s.history.reset());
            }
            if (iter + 1) % window == 0 {
                rounds += 1;
                let gain = 2.0 / (rounds as f64).sqrt();
                for st in states.iter_mut() {
                    let rate = st.window_accepts as f64 / window as f64;
                    if st.window_accepts == 0 {
                        rejected_windows += 1;
                        st.log_scale += 0.5f64.ln();
                    } else {
                        st.log_scale += gain.min(1.0) * (rate - config.target_acceptance);
                    }
                    st.window_accepts = 0;
                    let d = st.dim();
                    if st.history.count() >= (10 * d).max(50) {
                        if let Some(l) = scaled_chol(&st.history.covariance(), d) {
                            st.chol = l;
                            if !st.adapted_cov {
                                st.adapted_cov = true;
                                st.log_scale = 0.0;
                            }
                        }
                    }
                }
            }
        } else if (iter + 1 - config.burn_in) % config.thinning == 0 {
            kept.push(target.output(&x));
        }
    }

    let post = (config.iterations - config.burn_in) as f64;
    let stats = ChainStats {
        block_acceptance: states.iter().map(|s| s.accepts_after_burn as f64 / post).collect(),
        rejected_windows,
    };
    (kept, stats)
}
