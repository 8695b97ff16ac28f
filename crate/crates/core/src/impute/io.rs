//! Long-format imputation files: one row per imputed record and dataset.
//!
//! Columns are `dataset, draw_index, stream, id, area, smoking, probability`.
//! `area` is `NA` unless the record's area was imputed, `smoking` is `NA` for
//! participants whose area alone was filled, and `probability` is `NA` unless kept.
//! A dataset with nothing to impute is written as a single row with `id = NA`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::{check_records, Imputation, ImputedDataset};
use crate::domain::io::NA;
use crate::domain::{Area, PersonRecord};
use crate::error::{Error, Result};

pub const IMPUTATION_COLUMNS: [&str; 7] = ["dataset", "draw_index", "stream", "id", "area", "smoking", "probability"];

pub fn write_imputations(imp: &Imputation, base: &[PersonRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| Error::Schema(format!("{}: {e}", path.display()));
    w.write_record(IMPUTATION_COLUMNS).map_err(fail)?;
    let mut rows: Vec<(usize, Option<usize>, Option<usize>)> = Vec::new();
    let mut area_pos: HashMap<usize, usize> = imp.area_targets.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    for (k, &i) in imp.targets.iter().enumerate() {
        rows.push((i, area_pos.remove(&i), Some(k)));
    }
    rows.extend(area_pos.into_iter().map(|(i, a)| (i, Some(a), None)));
    rows.sort_unstable_by_key(|r| r.0);
    for (k, d) in imp.datasets.iter().enumerate() {
        if rows.is_empty() {
            let mut rec = vec![k.to_string(), d.draw_index.to_string(), d.stream.to_string()];
            rec.extend([NA; 4].map(String::from));
            w.write_record(&rec).map_err(fail)?;
        }
        for &(i, a, t) in &rows {
            w.write_record([
                k.to_string(),
                d.draw_index.to_string(),
                d.stream.to_string(),
                base[i].id.clone(),
                a.map_or_else(|| NA.to_string(), |a| d.areas[a].code().to_string()),
                t.map_or_else(|| NA.to_string(), |t| u8::from(d.smoking[t]).to_string()),
                t.and_then(|t| d.probabilities.get(t))
                    .map_or_else(|| NA.to_string(), |p| p.to_string()),
            ])
            .map_err(fail)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_imputations`] against the same base dataset.
pub fn read_imputations(base: &[PersonRecord], path: impl AsRef<Path>) -> Result<Imputation> {
    let path = path.as_ref();
    let (targets, area_targets) = check_records(base)?;
    let by_id: HashMap<&str, usize> = base.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let target_pos: HashMap<usize, usize> = targets.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let area_pos: HashMap<usize, usize> = area_targets.iter().enumerate().map(|(k, &i)| (i, k)).collect();

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let header = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    if header.iter().ne(IMPUTATION_COLUMNS.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: expected columns {}",
            path.display(),
            IMPUTATION_COLUMNS.join(",")
        )));
    }
    struct Partial {
        draw_index: usize,
        stream: u64,
        smoking: Vec<Option<bool>>,
        areas: Vec<Option<Area>>,
        probabilities: Vec<Option<f64>>,
    }
    let mut sets: Vec<Partial> = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let row = n + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let err = |m: String| Error::Parse { row, message: m };
        let k: usize = rec[0].parse().map_err(|e| err(format!("dataset: {e}")))?;
        if k > sets.len() {
            return Err(err(format!("dataset {k} appears before dataset {}", sets.len())));
        }
        if k == sets.len() {
            sets.push(Partial {
                draw_index: rec[1].parse().map_err(|e| err(format!("draw_index: {e}")))?,
                stream: rec[2].parse().map_err(|e| err(format!("stream: {e}")))?,
                smoking: vec![None; targets.len()],
                areas: vec![None; area_targets.len()],
                probabilities: vec![None; targets.len()],
            });
        }
        let set = &mut sets[k];
        if &rec[3] == NA {
            continue;
        }
        let &i = by_id
            .get(&rec[3])
            .ok_or_else(|| err(format!("id {} is not in the base dataset", &rec[3])))?;
        if &rec[4] != NA {
            let &a = area_pos
                .get(&i)
                .ok_or_else(|| err(format!("record {} has a known area", &rec[3])))?;
            let code: u8 = rec[4].parse().map_err(|e| err(format!("area: {e}")))?;
            set.areas[a] = Some(Area::from_code(code).ok_or_else(|| err(format!("unknown area {code}")))?);
        }
        if &rec[5] != NA {
            let &t = target_pos
                .get(&i)
                .ok_or_else(|| err(format!("record {} is not a sampled non-participant", &rec[3])))?;
            set.smoking[t] = Some(match &rec[5] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("smoking: expected 0 or 1, found {other:?}"))),
            });
            if &rec[6] != NA {
                set.probabilities[t] = Some(rec[6].parse().map_err(|e| err(format!("probability: {e}")))?);
            }
        }
    }
    let datasets = sets
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let missing = || Error::Schema(format!("{}: dataset {k} does not cover every imputed record", path.display()));
            let probabilities: Vec<f64> = p.probabilities.iter().flatten().copied().collect();
            if !probabilities.is_empty() && probabilities.len() != targets.len() {
                return Err(missing());
            }
            Ok(ImputedDataset {
                draw_index: p.draw_index,
                stream: p.stream,
                smoking: p.smoking.into_iter().collect::<Option<_>>().ok_or_else(missing)?,
                areas: p.areas.into_iter().collect::<Option<_>>().ok_or_else(missing)?,
                probabilities,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Imputation {
        targets,
        area_targets,
        datasets,
    })
}
