//! Dense helpers for the small matrices used by proposals and mode finding.
//! Matrices are row-major `Vec<f64>` of size `n * n`.

/// Lower Cholesky factor, or `None` when `m` is not positive definite.
pub fn cholesky(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the lower factor `l`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Inverse of a symmetric positive-definite matrix from its Cholesky factor.
pub fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, n, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    inv
}

/// `L z` for a lower-triangular `l`.
pub fn lower_mul(l: &[f64], n: usize, z: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..=i).map(|k| l[i * n + k] * z[k]).sum())
        .collect()
}

/// Running mean and covariance (Welford).
#[derive(Debug, Clone)]
pub struct RunningCov {
    n: usize,
    dim: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningCov {
    pub fn new(dim: usize) -> Self {
        RunningCov {
            n: 0,
            dim,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim * dim],
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let inv_n = 1.0 / self.n as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * inv_n;
        }
        for i in 0..self.dim {
            let di_new = x[i] - self.mean[i];
            for j in 0..self.dim {
                self.m2[i * self.dim + j] += delta[j] * di_new;
            }
        }
    }

    pub fn covariance(&self) -> Vec<f64> {
        let denom = (self.n.max(2) - 1) as f64;
        let mut c: Vec<f64> = self.m2.iter().map(|v| v / denom).collect();
        // symmetrize accumulated rounding
        for i in 0..self.dim {
            for j in 0..i {
                let v = 0.5 * (c[i * self.dim + j] + c[j * self.dim + i]);
                c[i * self.dim + j] = v;
                c[j * self.dim + i] = v;
            }
        }
        c
    }

    pub fn reset(&mut self) {
        *self = RunningCov::new(self.dim);
    }
}
