use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{standardized_cell, weighted_prevalence, Unit};
use crate::domain::io::NA;
use crate::domain::{Area, Gender, PersonRecord, StandardizationTable, Stratum, StudyYear};
use crate::error::{Error, Result};
use crate::impute::Imputation;
use crate::stats::{mean, quantile};
use crate::synth::TruthRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrevalenceOptions {
    /// Cells with a smaller Kish effective sample size are reported as NA.
    pub min_effective_n: f64,
}

impl Default for PrevalenceOptions {
    fn default() -> Self {
        PrevalenceOptions { min_effective_n: 10.0 }
    }
}

/// Rates in percent. `corrected` is the mean over imputations and
/// `lower`/`upper` its 2.5% and 97.5% quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub area: Area,
    pub gender: Gender,
    pub year: StudyYear,
    pub uncorrected: Option<f64>,
    pub corrected: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub n_sampled: usize,
    pub n_participants: usize,
}

impl TrendRow {
    pub fn cell(&self) -> Stratum {
        Stratum::new(self.area, self.year, self.gender)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendTable {
    pub rows: Vec<TrendRow>,
}

impl TrendTable {
    pub fn get(&self, cell: Stratum) -> Option<&TrendRow> {
        self.rows.iter().find(|r| r.cell() == cell)
    }
}

type Support = BTreeMap<(Area, StudyYear), Vec<bool>>;

/// Bands with at least one sampled person of known area, per (area, year).
fn sample_support<'a>(
    people: impl Iterator<Item = (Area, StudyYear, f64)> + 'a,
    table: &StandardizationTable,
) -> Support {
    let mut s: Support = BTreeMap::new();
    for (area, year, age) in people {
        if let Some(b) = table.band_of(age) {
            s.entry((area, year)).or_insert_with(|| vec![false; table.bands().len()])[b] = true;
        }
    }
    s
}

fn standardized_all(
    units: &[Unit],
    table: &StandardizationTable,
    support: &Support,
    opts: &PrevalenceOptions,
) -> Result<BTreeMap<Stratum, Option<f64>>> {
    let cells = weighted_prevalence(units, table)?;
    Ok(cells
        .iter()
        .map(|(&cell, est)| {
            let rate = support
                .get(&(cell.area, cell.year))
                .and_then(|sup| standardized_cell(est, table, sup, opts.min_effective_n));
            (cell, rate)
        })
        .collect())
}

/// Corrected and uncorrected standardized prevalence per cell. The uncorrected
/// rate uses participants only; each imputed dataset gives one corrected rate
/// from all sampled persons. Both use weights `1 / inclusion probability` and
/// standardize over the bands the wave's sample covers in that area.
pub fn trend_with_ci(
    base: &[PersonRecord],
    imputation: &Imputation,
    table: &StandardizationTable,
    opts: &PrevalenceOptions,
) -> Result<TrendTable> {
    if imputation.datasets.len() < 2 {
        return Err(Error::Precondition(format!(
            "credible intervals need at least 2 imputed datasets, got {}",
            imputation.datasets.len()
        )));
    }
    let support = sample_support(
        base.iter()
            .filter(|r| r.sampled)
            .filter_map(|r| r.covariates.area.map(|a| (a, r.covariates.study_year, r.covariates.age_at_baseline))),
        table,
    );
    let participants: Vec<Unit> = base
        .iter()
        .filter(|r| r.participated)
        .map(|r| -> Result<Unit> {
            let cell = r.covariates.stratum().ok_or_else(|| Error::MissingArea(r.id.clone()))?;
            Ok(Unit {
                cell,
                age: r.covariates.age_at_baseline,
                weight: r.design_weight(),
                smoking: r.smoking.ok_or_else(|| Error::Domain(format!("participant {} has no smoking", r.id)))?,
            })
        })
        .collect::<Result<_>>()?;
    let uncorrected = standardized_all(&participants, table, &support, opts)?;

    let target_pos: BTreeMap<usize, usize> = imputation.targets.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let area_pos: BTreeMap<usize, usize> = imputation.area_targets.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let per_dataset: Vec<BTreeMap<Stratum, Option<f64>>> = imputation
        .datasets
        .par_iter()
        .map(|d| {
            let units: Vec<Unit> = base
                .iter()
                .enumerate()
                .filter(|(_, r)| r.sampled)
                .map(|(i, r)| {
                    let area = match r.covariates.area {
                        Some(a) => a,
                        None => d.areas[*area_pos.get(&i).ok_or_else(|| Error::MissingArea(r.id.clone()))?],
                    };
                    let smoking = match target_pos.get(&i) {
                        Some(&k) => d.smoking[k],
                        None => r.smoking.ok_or_else(|| Error::Domain(format!("record {} has no smoking", r.id)))?,
                    };
                    Ok(Unit {
                        cell: Stratum::new(area, r.covariates.study_year, r.covariates.gender),
                        age: r.covariates.age_at_baseline,
                        weight: r.design_weight(),
                        smoking,
                    })
                })
                .collect::<Result<_>>()?;
            standardized_all(&units, table, &support, opts)
        })
        .collect::<Result<_>>()?;

    let mut cells: BTreeSet<Stratum> = uncorrected.keys().copied().collect();
    for m in &per_dataset {
        cells.extend(m.keys().copied());
    }
    let mut counts: BTreeMap<Stratum, (usize, usize)> = BTreeMap::new();
    for r in base.iter().filter(|r| r.sampled) {
        if let Some(c) = r.covariates.stratum() {
            let e = counts.entry(c).or_default();
            e.0 += 1;
            e.1 += usize::from(r.participated);
        }
    }
    let rows = cells
        .into_iter()
        .map(|cell| {
            let values: Option<Vec<f64>> = per_dataset
                .iter()
                .map(|m| m.get(&cell).copied().flatten().map(|v| 100.0 * v))
                .collect();
            let (corrected, lower, upper) = match values {
                Some(v) => (Some(mean(&v)), Some(quantile(&v, 0.025)), Some(quantile(&v, 0.975))),
                None => (None, None, None),
            };
            let (n_sampled, n_participants) = counts.get(&cell).copied().unwrap_or_default();
            TrendRow {
                area: cell.area,
                gender: cell.gender,
                year: cell.year,
                uncorrected: uncorrected.get(&cell).copied().flatten().map(|v| 100.0 * v),
                corrected,
                lower,
                upper,
                n_sampled,
                n_participants,
            }
        })
        .collect();
    Ok(TrendTable { rows })
}

/// Standardized true prevalence (fraction, not percent) of the whole simulated population per cell.
pub fn population_truth(
    truth: &[TruthRecord],
    table: &StandardizationTable,
    opts: &PrevalenceOptions,
) -> Result<BTreeMap<Stratum, Option<f64>>> {
    let support = sample_support(
        truth.iter().filter(|t| t.sampled).map(|t| {
            let c = &t.covariates;
            (c.area.expect("truth has areas"), c.study_year, c.age_at_baseline)
        }),
        table,
    );
    let units: Vec<Unit> = truth
        .iter()
        .map(|t| Unit {
            cell: t.covariates.stratum().expect("truth has areas"),
            age: t.covariates.age_at_baseline,
            weight: 1.0,
            smoking: t.smoking,
        })
        .collect();
    standardized_all(&units, table, &support, opts)
}

/// Standardized prevalence (fraction) from every sampled person's true smoking
/// status with design weights, i.e. what full participation would show.
pub fn sample_truth(
    truth: &[TruthRecord],
    table: &StandardizationTable,
    opts: &PrevalenceOptions,
) -> Result<BTreeMap<Stratum, Option<f64>>> {
    let sampled: Vec<&TruthRecord> = truth.iter().filter(|t| t.sampled).collect();
    let support = sample_support(
        sampled.iter().map(|t| {
            let c = &t.covariates;
            (c.area.expect("truth has areas"), c.study_year, c.age_at_baseline)
        }),
        table,
    );
    let units: Vec<Unit> = sampled
        .iter()
        .map(|t| Unit {
            cell: t.covariates.stratum().expect("truth has areas"),
            age: t.covariates.age_at_baseline,
            weight: 1.0 / t.inclusion_probability,
            smoking: t.smoking,
        })
        .collect();
    standardized_all(&units, table, &support, opts)
}

pub const TREND_COLUMNS: [&str; 9] = [
    "area",
    "gender",
    "study_year",
    "uncorrected",
    "corrected",
    "lower",
    "upper",
    "n_sampled",
    "n_participants",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

pub fn write_trend_csv(t: &TrendTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| Error::Schema(format!("{}: {e}", path.display()));
    w.write_record(TREND_COLUMNS).map_err(fail)?;
    for r in &t.rows {
        w.write_record([
            r.area.code().to_string(),
            r.gender.as_str().to_string(),
            r.year.year().to_string(),
            opt(r.uncorrected),
            opt(r.corrected),
            opt(r.lower),
            opt(r.upper),
            r.n_sampled.to_string(),
            r.n_participants.to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trend_csv(path: impl AsRef<Path>) -> Result<TrendTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let header = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    if header.iter().ne(TREND_COLUMNS.iter().copied()) {
        return Err(Error::Schema(format!("{}: expected columns {}", path.display(), TREND_COLUMNS.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let err = |col: &str, m: String| Error::Parse {
            row,
            message: format!("{col}: {m}"),
        };
        let rate = |k: usize| -> Result<Option<f64>> {
            if &rec[k] == NA {
                return Ok(None);
            }
            let v: f64 = rec[k].parse().map_err(|e| err(TREND_COLUMNS[k], format!("{e}")))?;
            if !(0.0..=100.0).contains(&v) {
                return Err(err(TREND_COLUMNS[k], format!("rate {v} outside [0, 100]")));
            }
            Ok(Some(v))
        };
        let count = |k: usize| -> Result<usize> { rec[k].parse().map_err(|e| err(TREND_COLUMNS[k], format!("{e}"))) };
        let code: u8 = rec[0].parse().map_err(|e| err("area", format!("{e}")))?;
        let year: u16 = rec[2].parse().map_err(|e| err("study_year", format!("{e}")))?;
        let r = TrendRow {
            area: Area::from_code(code).ok_or_else(|| err("area", format!("unknown area {code}")))?,
            gender: Gender::parse(&rec[1]).ok_or_else(|| err("gender", rec[1].to_string()))?,
            year: StudyYear::from_year(year).ok_or_else(|| err("study_year", format!("unknown year {year}")))?,
            uncorrected: rate(3)?,
            corrected: rate(4)?,
            lower: rate(5)?,
            upper: rate(6)?,
            n_sampled: count(7)?,
            n_participants: count(8)?,
        };
        if let (Some(l), Some(u)) = (r.lower, r.upper) {
            if l > u {
                return Err(err("lower", format!("lower bound {l} above upper bound {u}")));
            }
        }
        rows.push(r);
    }
    Ok(TrendTable { rows })
}
