//! Delimited-text dataset format.
//!
//! Columns are fixed: `id, study_year, area, gender, age_at_baseline, sampled,
//! participated, smoking, event_age, event_observed, inclusion_probability`.
//! Booleans are `0`/`1` and missing values are the literal `NA`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Area, Covariates, FollowUp, Gender, PersonRecord, StudyYear};
use crate::error::{Error, Result};

pub const NA: &str = "NA";

pub const DATASET_COLUMNS: [&str; 11] = [
    "id",
    "study_year",
    "area",
    "gender",
    "age_at_baseline",
    "sampled",
    "participated",
    "smoking",
    "event_age",
    "event_observed",
    "inclusion_probability",
];

fn bool01(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub(crate) fn record_fields(r: &PersonRecord) -> Vec<String> {
    let c = &r.covariates;
    vec![
        r.id.clone(),
        c.study_year.year().to_string(),
        c.area.map_or_else(|| NA.to_string(), |a| a.code().to_string()),
        c.gender.as_str().to_string(),
        c.age_at_baseline.to_string(),
        bool01(r.sampled).into(),
        bool01(r.participated).into(),
        r.smoking.map_or(NA, bool01).into(),
        r.followup.map_or_else(|| NA.to_string(), |f| f.event_age.to_string()),
        r.followup.map_or(NA, |f| bool01(f.event_observed)).into(),
        r.inclusion_probability.to_string(),
    ]
}

pub fn write_dataset(records: &[PersonRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(records, BufWriter::new(file)).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_dataset_to<W: Write>(records: &[PersonRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_COLUMNS).map_err(|e| Error::Schema(e.to_string()))?;
    for r in records {
        w.write_record(record_fields(r)).map_err(|e| Error::Schema(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Schema(e.to_string()))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<PersonRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_from(BufReader::new(file))
}

pub fn read_dataset_from<R: Read>(input: R) -> Result<Vec<PersonRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got.len() < DATASET_COLUMNS.len() || got[..DATASET_COLUMNS.len()] != DATASET_COLUMNS {
        return Err(Error::Schema(format!(
            "expected columns {}; found {}",
            DATASET_COLUMNS.join(","),
            got.join(",")
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let fields: Vec<&str> = rec.iter().collect();
        let record = parse_record(&fields, row)?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId { id: record.id, row });
        }
        out.push(record);
    }
    Ok(out)
}

pub(crate) fn parse_record(f: &[&str], row: usize) -> Result<PersonRecord> {
    let err = |col: &str, msg: String| Error::Parse {
        row,
        message: format!("{col}: {msg}"),
    };
    if f.len() < DATASET_COLUMNS.len() {
        return Err(err("row", format!("expected {} fields, found {}", DATASET_COLUMNS.len(), f.len())));
    }
    let flag = |k: usize| -> Result<bool> {
        match f[k] {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(err(DATASET_COLUMNS[k], format!("expected 0 or 1, found {other:?}"))),
        }
    };
    let opt_flag = |k: usize| -> Result<Option<bool>> {
        if f[k] == NA {
            Ok(None)
        } else {
            flag(k).map(Some)
        }
    };
    let real = |k: usize| -> Result<f64> {
        let v = f[k]
            .parse::<f64>()
            .map_err(|e| err(DATASET_COLUMNS[k], format!("{e} ({:?})", f[k])))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(DATASET_COLUMNS[k], "non-finite value".into()))
        }
    };

    let id = f[0].to_string();
    if id.is_empty() || id == NA {
        return Err(err("id", "missing identifier".into()));
    }
    let year: u16 = f[1].parse().map_err(|e| err("study_year", format!("{e}")))?;
    let study_year = StudyYear::from_year(year).ok_or_else(|| err("study_year", format!("unknown year {year}")))?;
    let area = if f[2] == NA {
        None
    } else {
        let code: u8 = f[2].parse().map_err(|e| err("area", format!("{e}")))?;
        Some(Area::from_code(code).ok_or_else(|| err("area", format!("unknown area code {code}")))?)
    };
    let gender = Gender::parse(f[3]).ok_or_else(|| err("gender", format!("expected man or woman, found {:?}", f[3])))?;
    let age_at_baseline = real(4)?;
    let sampled = flag(5)?;
    let participated = flag(6)?;
    let smoking = opt_flag(7)?;
    let followup = match (f[8] == NA, f[9] == NA) {
        (true, true) => None,
        (false, false) => Some(FollowUp {
            event_age: real(8)?,
            event_observed: flag(9)?,
        }),
        _ => return Err(err("event_age", "event_age and event_observed must both be NA or both present".into())),
    };
    let inclusion_probability = real(10)?;
    Ok(PersonRecord {
        id,
        covariates: Covariates {
            age_at_baseline,
            area,
            gender,
            study_year,
        },
        sampled,
        participated,
        smoking,
        followup,
        inclusion_probability,
    })
}
