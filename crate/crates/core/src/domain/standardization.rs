use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-open age band `[lower, upper)` with its standard-population weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBand {
    pub lower: f64,
    pub upper: f64,
    pub weight: f64,
}

impl AgeBand {
    pub fn contains(&self, age: f64) -> bool {
        age >= self.lower && age < self.upper
    }
}

/// Age-band weights of a standard population, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationTable {
    bands: Vec<AgeBand>,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl StandardizationTable {
    pub fn new(bands: Vec<AgeBand>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Config("standardization table has no bands".into()));
        }
        for (i, b) in bands.iter().enumerate() {
            if !(b.lower < b.upper) || !b.lower.is_finite() || !b.upper.is_finite() {
                return Err(Error::Config(format!("band {i} [{}, {}) is empty or invalid", b.lower, b.upper)));
            }
            if !(b.weight >= 0.0) || !b.weight.is_finite() {
                return Err(Error::Config(format!("band {i} has invalid weight {}", b.weight)));
            }
            if i > 0 && b.lower < bands[i - 1].upper {
                return Err(Error::Config(format!("band {i} overlaps or precedes band {}", i - 1)));
            }
        }
        let total: f64 = bands.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Config(format!("standardization weights sum to {total}, not 1")));
        }
        Ok(StandardizationTable { bands })
    }

    /// Builds a table from standard-population counts, normalizing them to weights.
    pub fn from_population(bands: &[(f64, f64, f64)]) -> Result<Self> {
        let total: f64 = bands.iter().map(|b| b.2).sum();
        if !(total > 0.0) {
            return Err(Error::Config("standard population is empty".into()));
        }
        let mut rows: Vec<AgeBand> = bands
            .iter()
            .map(|&(lower, upper, n)| AgeBand {
                lower,
                upper,
                weight: n / total,
            })
            .collect();
        fix_rounding(&mut rows);
        StandardizationTable::new(rows)
    }

    /// Equal weights on consecutive bands given by `edges`.
    pub fn uniform(edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Config("need at least two band edges".into()));
        }
        let bands: Vec<(f64, f64, f64)> = edges.windows(2).map(|w| (w[0], w[1], 1.0)).collect();
        StandardizationTable::from_population(&bands)
    }

    /// Reads `lower,upper,weight` rows, or `lower,upper,population` rows which are normalized.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let counts = match cols.as_slice() {
            ["lower", "upper", "weight"] => false,
            ["lower", "upper", "population"] => true,
            _ => {
                return Err(Error::Schema(format!(
                    "standardization header must be lower,upper,weight or lower,upper,population; got {}",
                    cols.join(",")
                )))
            }
        };
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let num = |k: usize| -> Result<f64> {
                rec[k].trim().parse::<f64>().map_err(|e| Error::Parse {
                    row: i + 2,
                    message: format!("column {}: {e}", cols[k]),
                })
            };
            rows.push((num(0)?, num(1)?, num(2)?));
        }
        if counts {
            StandardizationTable::from_population(&rows)
        } else {
            StandardizationTable::new(
                rows.into_iter()
                    .map(|(lower, upper, weight)| AgeBand { lower, upper, weight })
                    .collect(),
            )
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["lower", "upper", "weight"]).map_err(|e| csv_err(path, e))?;
        for b in &self.bands {
            w.write_record([b.lower.to_string(), b.upper.to_string(), b.weight.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn bands(&self) -> &[AgeBand] {
        &self.bands
    }

    pub fn band_of(&self, age: f64) -> Option<usize> {
        self.bands.iter().position(|b| b.contains(age))
    }

    /// True when the bands cover `[lower, upper)` without gaps.
    pub fn covers(&self, lower: f64, upper: f64) -> bool {
        let mut reach = lower;
        for b in &self.bands {
            if b.upper <= reach {
                continue;
            }
            if b.lower > reach {
                return false;
            }
            reach = b.upper;
            if reach >= upper {
                return true;
            }
        }
        reach >= upper
    }

    /// Drops bands that do not intersect `[lower, upper)` and renormalizes the rest.
    pub fn restricted_to(&self, lower: f64, upper: f64) -> Result<Self> {
        let kept: Vec<(f64, f64, f64)> = self
            .bands
            .iter()
            .filter(|b| b.upper > lower && b.lower < upper)
            .map(|b| (b.lower, b.upper, b.weight))
            .collect();
        if kept.is_empty() {
            return Err(Error::Config(format!("no standardization band intersects [{lower}, {upper})")));
        }
        if kept.len() == self.bands.len() {
            return Ok(self.clone());
        }
        StandardizationTable::from_population(&kept)
    }
}

/// Pushes the floating-point residual of a normalization into the largest weight.
fn fix_rounding(rows: &mut [AgeBand]) {
    let total: f64 = rows.iter().map(|b| b.weight).sum();
    if let Some(big) = rows
        .iter_mut()
        .max_by(|a, b| a.weight.total_cmp(&b.weight))
    {
        big.weight += 1.0 - total;
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        row,
        message: format!("{}: {e}", path.display()),
    }
}
