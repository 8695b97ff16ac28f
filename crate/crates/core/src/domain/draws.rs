use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub n_chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl RunMeta {
    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }
}

/// Thinned draws of several chains, stored row-major and ordered by chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    parameter_names: Vec<String>,
    values: Vec<f64>,
    chain: Vec<usize>,
    meta: RunMeta,
}

impl PosteriorDraws {
    pub fn new(parameter_names: Vec<String>, values: Vec<f64>, chain: Vec<usize>, meta: RunMeta) -> Result<Self> {
        let p = parameter_names.len();
        if p == 0 {
            return Err(Error::Domain("posterior draws need at least one parameter".into()));
        }
        if values.len() != chain.len() * p {
            return Err(Error::Domain(format!(
                "{} values do not fill {} draws of {} parameters",
                values.len(),
                chain.len(),
                p
            )));
        }
        let mut counts = vec![0usize; meta.n_chains];
        for &c in &chain {
            *counts
                .get_mut(c)
                .ok_or_else(|| Error::Domain(format!("chain id {c} out of range")))? += 1;
        }
        if counts.iter().any(|&c| c != counts[0]) {
            return Err(Error::Domain(format!("chains retained unequal draw counts {counts:?}")));
        }
        if chain.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("draws must be ordered by chain".into()));
        }
        Ok(PosteriorDraws {
            parameter_names,
            values,
            chain,
            meta,
        })
    }

    pub fn parameter_names(&self) -> &[String] {
        &self.parameter_names
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn n_params(&self) -> usize {
        self.parameter_names.len()
    }

    pub fn n_draws(&self) -> usize {
        self.chain.len()
    }

    pub fn n_chains(&self) -> usize {
        self.meta.n_chains
    }

    pub fn per_chain(&self) -> usize {
        self.n_draws() / self.n_chains().max(1)
    }

    pub fn chain_ids(&self) -> &[usize] {
        &self.chain
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|i| self.row(i)[j]).collect()
    }

    /// Draws of parameter `j`, one vector per chain in chain order.
    pub fn chains_of(&self, j: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::with_capacity(self.per_chain()); self.n_chains()];
        for i in 0..self.n_draws() {
            out[self.chain[i]].push(self.row(i)[j]);
        }
        out
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameter_names.iter().position(|n| n == name)
    }

    /// Writes `chain,<parameter names…>` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let mut header = vec!["chain".to_string()];
        header.extend(self.parameter_names.iter().cloned());
        w.write_record(&header).map_err(|e| Error::Schema(e.to_string()))?;
        for i in 0..self.n_draws() {
            let mut rec = vec![self.chain[i].to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| Error::Schema(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>, meta: RunMeta) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let header = r.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
        if header.get(0) != Some("chain") {
            return Err(Error::Schema("draw file must start with a chain column".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut values = Vec::new();
        let mut chain = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            if rec.len() != names.len() + 1 {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {} fields, found {}", names.len() + 1, rec.len()),
                });
            }
            chain.push(rec[0].parse::<usize>().map_err(|e| Error::Parse {
                row,
                message: format!("chain: {e}"),
            })?);
            for (k, field) in rec.iter().skip(1).enumerate() {
                values.push(field.parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    message: format!("{}: {e}", names[k]),
                })?);
            }
        }
        PosteriorDraws::new(names, values, chain, meta)
    }
}
