use serde::{Deserialize, Serialize};

use crate::domain::PosteriorDraws;
use crate::error::{Error, Result};
use crate::stats::{mean, variance};

/// Potential scale reduction of one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RHat {
    Value(f64),
    /// Every split chain has zero variance.
    Degenerate,
}

impl RHat {
    pub fn value(self) -> Option<f64> {
        match self {
            RHat::Value(v) => Some(v),
            RHat::Degenerate => None,
        }
    }

    /// Degenerate parameters count as converged only when all chains agree exactly.
    pub fn below(self, threshold: f64) -> bool {
        match self {
            RHat::Value(v) => v < threshold,
            RHat::Degenerate => true,
        }
    }
}

/// Minimum retained draws per chain (two per split half).
pub const MIN_DRAWS_PER_CHAIN: usize = 4;

/// Split-chain R̂: each chain is cut into halves (the middle draw is dropped
/// for odd lengths), then `sqrt(((n-1)/n W + B/n) / W)` with `W` the mean
/// within-half variance and `B` `n` times the variance of the half means.
/// Values below one are reported as one.
pub fn split_rhat(chains: &[Vec<f64>]) -> RHat {
    let n_full = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n_full / 2;
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        halves.push(&c[..half]);
        halves.push(&c[n_full - half..n_full]);
    }
    let n = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| variance(h)).sum::<f64>() / halves.len() as f64;
    let b = n * variance(&means);
    if w <= 0.0 {
        return if b <= 0.0 { RHat::Degenerate } else { RHat::Value(f64::INFINITY) };
    }
    let r = (((n - 1.0) / n * w + b / n) / w).sqrt();
    RHat::Value(r.max(1.0))
}

/// R̂ for every parameter.
pub fn bgr_diagnostic(draws: &PosteriorDraws) -> Result<Vec<RHat>> {
    if draws.n_chains() < 2 {
        return Err(Error::Precondition("convergence diagnostics require at least 2 chains".into()));
    }
    if draws.per_chain() < MIN_DRAWS_PER_CHAIN {
        return Err(Error::Precondition(format!(
            "convergence diagnostics require at least {MIN_DRAWS_PER_CHAIN} draws per chain"
        )));
    }
    Ok((0..draws.n_params()).map(|j| split_rhat(&draws.chains_of(j))).collect())
}

/// Multi-chain effective sample size with Geyer's initial positive sequence
/// on chain-averaged autocorrelations.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return (m * n) as f64;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let autocov = |c: &[f64], mu: f64, lag: usize| -> f64 {
        (0..n - lag).map(|t| (c[t] - mu) * (c[t + lag] - mu)).sum::<f64>() / n as f64
    };
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 { variance(&means) } else { 0.0 };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if var_plus <= 0.0 {
        return (m * n) as f64;
    }
    let rho = |lag: usize| -> f64 {
        let acov = chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocov(c, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (w - acov) / var_plus
    };
    // tau = -1 + 2 * sum of pairs (rho(2k) + rho(2k+1)), truncated at the first
    // non-positive pair and forced monotone
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let even = if k == 0 { 1.0 } else { rho(2 * k) };
        let pair = even + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        k += 1;
    }
    let total = (m * n) as f64;
    let tau = tau.max(1.0 / total.log10());
    (m * n) as f64 / tau
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub parameter_names: Vec<String>,
    pub rhat: Vec<RHat>,
    pub ess: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub threshold: f64,
    pub converged: bool,
}

impl DiagnosticsReport {
    pub fn new(draws: &PosteriorDraws, acceptance: Vec<f64>, threshold: f64) -> Result<Self> {
        let rhat = bgr_diagnostic(draws)?;
        let ess = (0..draws.n_params())
            .map(|j| effective_sample_size(&draws.chains_of(j)))
            .collect();
        let converged = rhat.iter().all(|r| r.below(threshold));
        Ok(DiagnosticsReport {
            parameter_names: draws.parameter_names().to_vec(),
            rhat,
            ess,
            acceptance,
            threshold,
            converged,
        })
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().filter_map(|r| r.value()).fold(1.0, f64::max)
    }

    /// Parameters at or above the threshold.
    pub fn failing(&self) -> Vec<(&str, f64)> {
        self.parameter_names
            .iter()
            .zip(&self.rhat)
            .filter(|(_, r)| !r.below(self.threshold))
            .map(|(n, r)| (n.as_str(), r.value().unwrap_or(f64::NAN)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation with explicit loops, kept separate from `split_rhat`.
    fn reference_split_rhat(chains: &[Vec<f64>]) -> f64 {
        let mut parts: Vec<Vec<f64>> = Vec::new();
        for c in chains {
            let h = c.len() / 2;
            parts.push(c[..h].to_vec());
            parts.push(c[c.len() - h..].to_vec());
        }
        let m = parts.len() as f64;
        let n = parts[0].len() as f64;
        let mut part_means = Vec::new();
        let mut w = 0.0;
        for p in &parts {
            let mu = p.iter().sum::<f64>() / n;
            let mut ss = 0.0;
            for v in p {
                ss += (v - mu) * (v - mu);
            }
            w += ss / (n - 1.0);
            part_means.push(mu);
        }
        w /= m;
        let grand = part_means.iter().sum::<f64>() / m;
        let mut bb = 0.0;
        for mu in &part_means {
            bb += (mu - grand) * (mu - grand);
        }
        let b = n * bb / (m - 1.0);
        (((n - 1.0) / n * w + b / n) / w).sqrt()
    }

    #[test]
    fn hand_fixture() {
        let chains = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 3.0, 4.0, 5.0]];
        let got = split_rhat(&chains).value().unwrap();
        let reference = reference_split_rhat(&chains);
        assert!((got - reference).abs() < 1e-12);
        // halves {1,2},{3,4},{2,3},{4,5}: W = 0.5, B = 2 * 5/3
        assert!((got - (23.0f64 / 6.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identical_chains_clamp_to_one() {
        let c = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        assert_eq!(split_rhat(&[c.clone(), c]), RHat::Value(1.0));
    }

    #[test]
    fn constant_chains_are_degenerate() {
        assert_eq!(split_rhat(&[vec![2.0; 10], vec![2.0; 10]]), RHat::Degenerate);
        assert_eq!(split_rhat(&[vec![2.0; 10], vec![3.0; 10]]), RHat::Value(f64::INFINITY));
    }

    #[test]
    fn ess_of_independent_draws_is_near_n() {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let chains: Vec<Vec<f64>> = (0..4).map(|_| (0..2000).map(|_| r.random::<f64>()).collect()).collect();
        let ess = effective_sample_size(&chains);
        assert!(ess > 6000.0 && ess < 10000.0, "{ess}");
        // AR(1) with phi = 0.9: tau = 19
        let mut x = 0.0;
        let ar: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                (0..5000)
                    .map(|_| {
                        x = 0.9 * x + r.random::<f64>() - 0.5;
                        x
                    })
                    .collect()
            })
            .collect();
        let ess = effective_sample_size(&ar);
        assert!(ess > 20000.0 / 19.0 * 0.6 && ess < 20000.0 / 19.0 * 1.6, "{ess}");
    }
}
