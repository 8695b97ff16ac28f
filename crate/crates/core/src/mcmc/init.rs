use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{cholesky, cholesky_inverse, cholesky_solve, lower_mul};
use super::BlockTarget;
use crate::error::{Error, Result};
use crate::rng;

/// How chains are started.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// Every chain starts at the same point.
    Fixed(Vec<f64>),
    /// Chain starts are `center + scale * N(0, I)`.
    Jittered { center: Vec<f64>, scale: f64 },
    /// Each block is maximized from `start`; chains start at the mode plus
    /// `overdispersion * N(0, H⁻¹)` and the inverse Hessian seeds the proposals.
    Laplace { start: Vec<f64>, overdispersion: f64 },
}

/// Chain starting points and optional per-block proposal covariances.
#[derive(Debug, Clone)]
pub(crate) struct Initialization {
    pub starts: Vec<Vec<f64>>,
    pub block_cov: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct BlockMode {
    pub x: Vec<f64>,
    pub value: f64,
    /// Inverse negative Hessian at the mode, when it is positive definite.
    pub cov: Option<Vec<f64>>,
    pub iterations: usize,
}

fn block_value<T: BlockTarget + ?Sized>(t: &T, b: usize, idx: &[usize], base: &[f64], v: &[f64]) -> f64 {
    let mut x = base.to_vec();
    for (&i, &vi) in idx.iter().zip(v) {
        x[i] = vi;
    }
    t.block_log_density(b, &x)
}

fn block_grad<T: BlockTarget + ?Sized>(t: &T, b: usize, idx: &[usize], base: &[f64], v: &[f64]) -> Vec<f64> {
    let mut x = base.to_vec();
    for (&i, &vi) in idx.iter().zip(v) {
        x[i] = vi;
    }
    if let Some(g) = t.block_gradient(b, &x) {
        return g;
    }
    (0..idx.len())
        .map(|k| {
            let h = 1e-6 * v[k].abs().max(1.0);
            let mut up = v.to_vec();
            let mut dn = v.to_vec();
            up[k] += h;
            dn[k] -= h;
            (block_value(t, b, idx, base, &up) - block_value(t, b, idx, base, &dn)) / (2.0 * h)
        })
        .collect()
}

/// Negative Hessian by central differences of the gradient, symmetrized.
fn neg_hessian<T: BlockTarget + ?Sized>(t: &T, b: usize, idx: &[usize], base: &[f64], v: &[f64]) -> Vec<f64> {
    let d = idx.len();
    let mut h = vec![0.0; d * d];
    for k in 0..d {
        let step = 1e-5 * v[k].abs().max(1.0);
        let mut up = v.to_vec();
        let mut dn = v.to_vec();
        up[k] += step;
        dn[k] -= step;
        let gu = block_grad(t, b, idx, base, &up);
        let gd = block_grad(t, b, idx, base, &dn);
        for j in 0..d {
            h[k * d + j] = -(gu[j] - gd[j]) / (2.0 * step);
        }
    }
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (h[i * d + j] + h[j * d + i]);
            h[i * d + j] = s;
            h[j * d + i] = s;
        }
    }
    h
}

/// Maximizes one block's term by damped Newton steps (Levenberg-Marquardt).
pub fn find_block_mode<T: BlockTarget + ?Sized>(target: &T, block: usize, start: &[f64]) -> Result<BlockMode> {
    let blocks = target.blocks();
    let idx = &blocks[block].indices;
    let d = idx.len();
    let mut v: Vec<f64> = idx.iter().map(|&i| start[i]).collect();
    let mut f = block_value(target, block, idx, start, &v);
    if !f.is_finite() {
        return Err(Error::BadInitialPoint {
            block: blocks[block].name.clone(),
        });
    }
    let mut mu = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let g = block_grad(target, block, idx, start, &v);
        let a = neg_hessian(target, block, idx, start, &v);
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gmax < 1e-8 * (1.0 + f.abs()).sqrt() {
            break;
        }
        let mut improved = false;
        while mu < 1e14 {
            let mut m = a.clone();
            for i in 0..d {
                m[i * d + i] += mu * a[i * d + i].abs().max(1e-8);
            }
            if let Some(l) = cholesky(&m, d) {
                let step = cholesky_solve(&l, d, &g);
                let cand: Vec<f64> = v.iter().zip(&step).map(|(x, s)| x + s).collect();
                let fc = block_value(target, block, idx, start, &cand);
                if fc.is_finite() && fc >= f {
                    let gain = fc - f;
                    v = cand;
                    f = fc;
                    mu = (mu * 0.2).max(1e-12);
                    improved = gain > 1e-13 * (1.0 + f.abs());
                    break;
                }
            }
            mu *= 8.0;
        }
        if !improved {
            break;
        }
    }
    let a = neg_hessian(target, block, idx, start, &v);
    let cov = cholesky(&a, d).map(|l| cholesky_inverse(&l, d));
    let mut x = start.to_vec();
    for (&i, &vi) in idx.iter().zip(&v) {
        x[i] = vi;
    }
    Ok(BlockMode {
        x,
        value: f,
        cov,
        iterations,
    })
}

pub(crate) fn initialize<T: BlockTarget + ?Sized>(
    target: &T,
    strategy: &InitStrategy,
    n_chains: usize,
    seed: u64,
) -> Result<Initialization> {
    let dim = target.dim();
    let blocks = target.blocks();
    let check_len = |v: &[f64]| {
        if v.len() == dim {
            Ok(())
        } else {
            Err(Error::Precondition(format!("initial point has length {}, target has {dim}", v.len())))
        }
    };
    let normal = |r: &mut rand_chacha::ChaCha8Rng| -> f64 { r.sample(StandardNormal) };
    match strategy {
        InitStrategy::Fixed(x) => {
            check_len(x)?;
            Ok(Initialization {
                starts: vec![x.clone(); n_chains],
                block_cov: vec![None; blocks.len()],
            })
        }
        InitStrategy::Jittered { center, scale } => {
            check_len(center)?;
            let starts = (0..n_chains)
                .map(|c| {
                    let mut r = rng::stream(seed, rng::domain::CHAIN_INIT, c as u64);
                    center.iter().map(|v| v + scale * normal(&mut r)).collect()
                })
                .collect();
            Ok(Initialization {
                starts,
                block_cov: vec![None; blocks.len()],
            })
        }
        InitStrategy::Laplace { start, overdispersion } => {
            check_len(start)?;
            let mut mode = start.clone();
            let mut covs = Vec::with_capacity(blocks.len());
            for b in 0..blocks.len() {
                let m = find_block_mode(target, b, &mode)?;
                mode = m.x;
                covs.push(m.cov);
            }
            let starts = (0..n_chains)
                .map(|c| {
                    let mut r = rng::stream(seed, rng::domain::CHAIN_INIT, c as u64);
                    let mut x = mode.clone();
                    for (blk, cov) in blocks.iter().zip(&covs) {
                        let d = blk.indices.len();
                        let z: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
                        let shift = match cov.as_ref().and_then(|c| cholesky(c, d)) {
                            Some(l) => lower_mul(&l, d, &z),
                            None => z.iter().map(|v| v * 1e-3).collect(),
                        };
                        for (k, &i) in blk.indices.iter().enumerate() {
                            x[i] += overdispersion * shift[k];
                        }
                    }
                    x
                })
                .collect();
            Ok(Initialization { starts, block_cov: covs })
        }
    }
}
