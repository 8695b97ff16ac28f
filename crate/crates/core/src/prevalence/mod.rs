//! Design-weighted, age-standardized smoking prevalence per (area, gender,
//! year) cell, with and without the non-participant correction.

mod report;
mod trend;

pub use report::{render_report, report_rows, ReportRow};
pub use trend::{
    population_truth, read_trend_csv, sample_truth, trend_with_ci, write_trend_csv, PrevalenceOptions, TrendRow,
    TrendTable, TREND_COLUMNS,
};

use std::collections::BTreeMap;

use crate::domain::{AgeBand, StandardizationTable, Stratum};
use crate::error::{Error, Result};

/// One person's contribution to a prevalence estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub cell: Stratum,
    pub age: f64,
    pub weight: f64,
    pub smoking: bool,
}

/// Weighted sums of one cell, per standardization band.
#[derive(Debug, Clone, PartialEq)]
pub struct CellEstimate {
    pub weight_sum: Vec<f64>,
    pub smoker_weight: Vec<f64>,
    pub weight_sq_sum: Vec<f64>,
    pub count: Vec<usize>,
}

impl CellEstimate {
    fn new(n_bands: usize) -> Self {
        CellEstimate {
            weight_sum: vec![0.0; n_bands],
            smoker_weight: vec![0.0; n_bands],
            weight_sq_sum: vec![0.0; n_bands],
            count: vec![0; n_bands],
        }
    }

    /// `Σ w·Y / Σ w` per band; `None` for bands with no one in them.
    pub fn band_rates(&self) -> Vec<Option<f64>> {
        self.weight_sum
            .iter()
            .zip(&self.smoker_weight)
            .map(|(&w, &s)| (w > 0.0).then(|| s / w))
            .collect()
    }

    /// Kish effective sample size `(Σ w)² / Σ w²` over the whole cell.
    pub fn effective_n(&self) -> f64 {
        let w: f64 = self.weight_sum.iter().sum();
        let w2: f64 = self.weight_sq_sum.iter().sum();
        if w2 > 0.0 {
            w * w / w2
        } else {
            0.0
        }
    }

    pub fn support(&self) -> Vec<bool> {
        self.count.iter().map(|&c| c > 0).collect()
    }
}

/// Horvitz-Thompson ratio `Σ w·Y / Σ w`; `None` when there is no weight.
pub fn ratio_estimate(weights: &[f64], smoking: &[bool]) -> Option<f64> {
    let w: f64 = weights.iter().sum();
    let s: f64 = weights.iter().zip(smoking).filter(|(_, &y)| y).map(|(w, _)| w).sum();
    (w > 0.0).then(|| s / w)
}

/// Per-cell, per-band weighted sums. Units outside every band are skipped.
pub fn weighted_prevalence(units: &[Unit], table: &StandardizationTable) -> Result<BTreeMap<Stratum, CellEstimate>> {
    let n = table.bands().len();
    let mut cells: BTreeMap<Stratum, CellEstimate> = BTreeMap::new();
    for u in units {
        if !(u.weight > 0.0 && u.weight.is_finite()) {
            return Err(Error::Domain(format!("weight {} in cell {} must be positive", u.weight, u.cell)));
        }
        let Some(b) = table.band_of(u.age) else {
            continue;
        };
        let c = cells.entry(u.cell).or_insert_with(|| CellEstimate::new(n));
        c.weight_sum[b] += u.weight;
        c.weight_sq_sum[b] += u.weight * u.weight;
        c.count[b] += 1;
        if u.smoking {
            c.smoker_weight[b] += u.weight;
        }
    }
    Ok(cells)
}

/// `Σ weight_band × rate_band`. A band without a rate is an error unless its weight is zero.
pub fn standardize(rates: &[Option<f64>], table: &StandardizationTable) -> Result<f64> {
    if rates.len() != table.bands().len() {
        return Err(Error::Domain(format!(
            "{} band rates for a table with {} bands",
            rates.len(),
            table.bands().len()
        )));
    }
    let mut total = 0.0;
    for (r, b) in rates.iter().zip(table.bands()) {
        match r {
            Some(r) => total += b.weight * r,
            None if b.weight == 0.0 => {}
            None => {
                return Err(Error::Domain(format!("no rate for age band [{}, {})", b.lower, b.upper)));
            }
        }
    }
    Ok(total)
}

/// The table reduced to the bands flagged in `keep`, with weights renormalized.
/// `None` when the kept bands carry no weight.
pub fn restrict_table(table: &StandardizationTable, keep: &[bool]) -> Option<(StandardizationTable, Vec<usize>)> {
    let idx: Vec<usize> = (0..table.bands().len()).filter(|&i| keep[i]).collect();
    let total: f64 = idx.iter().map(|&i| table.bands()[i].weight).sum();
    if !(total > 0.0) {
        return None;
    }
    if idx.len() == table.bands().len() {
        return Some((table.clone(), idx));
    }
    let rows: Vec<(f64, f64, f64)> = idx
        .iter()
        .map(|&i| {
            let AgeBand { lower, upper, weight } = table.bands()[i];
            (lower, upper, weight)
        })
        .collect();
    StandardizationTable::from_population(&rows).ok().map(|t| (t, idx))
}

/// Standardized rate of one cell over the bands in `support`; `None` when some
/// supported band has no one in it or the cell is below `min_effective_n`.
pub fn standardized_cell(
    est: &CellEstimate,
    table: &StandardizationTable,
    support: &[bool],
    min_effective_n: f64,
) -> Option<f64> {
    if est.effective_n() < min_effective_n {
        return None;
    }
    let (sub, idx) = restrict_table(table, support)?;
    let rates = est.band_rates();
    let picked: Vec<Option<f64>> = idx.iter().map(|&i| rates[i]).collect();
    standardize(&picked, &sub).ok()
}
