use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::domain::io::{parse_record, record_fields, DATASET_COLUMNS};
use crate::domain::{Covariates, FollowUp, PersonRecord};
use crate::error::{Error, Result};

/// A simulated person with everything the survey and registry would hide.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub id: String,
    /// Covariates with the true area.
    pub covariates: Covariates,
    pub smoking: bool,
    /// Age at disease onset without censoring.
    pub event_age: f64,
    /// Age at which follow-up ends (administrative end or death from other causes).
    pub censor_age: f64,
    pub sampled: bool,
    pub participated: bool,
    pub inclusion_probability: f64,
}

impl TruthRecord {
    pub fn followup(&self) -> FollowUp {
        if self.event_age <= self.censor_age {
            FollowUp {
                event_age: self.event_age,
                event_observed: true,
            }
        } else {
            FollowUp {
                event_age: self.censor_age,
                event_observed: false,
            }
        }
    }

    /// The record with nothing hidden.
    pub fn unmasked(&self) -> PersonRecord {
        PersonRecord {
            id: self.id.clone(),
            covariates: self.covariates,
            sampled: self.sampled,
            participated: self.participated,
            smoking: Some(self.smoking),
            followup: Some(self.followup()),
            inclusion_probability: self.inclusion_probability,
        }
    }
}

/// Dataset columns (unmasked) followed by the uncensored event age and the censoring age.
pub const TRUTH_COLUMNS: [&str; 13] = [
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
    "event_age_uncensored",
    "censor_age",
];

pub fn write_truth(records: &[TruthRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| Error::Schema(format!("{}: {e}", path.display()));
    w.write_record(TRUTH_COLUMNS).map_err(fail)?;
    for t in records {
        let mut fields = record_fields(&t.unmasked());
        fields.push(t.event_age.to_string());
        fields.push(t.censor_age.to_string());
        w.write_record(fields).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<Vec<TruthRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let header = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    if header.iter().ne(TRUTH_COLUMNS.iter().copied()) {
        return Err(Error::Schema(format!("{}: expected columns {}", path.display(), TRUTH_COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let fields: Vec<&str> = rec.iter().collect();
        let r = parse_record(&fields[..DATASET_COLUMNS.len()], row)?;
        let real = |k: usize| {
            fields[k].parse::<f64>().map_err(|e| Error::Parse {
                row,
                message: format!("{}: {e}", TRUTH_COLUMNS[k]),
            })
        };
        let (Some(smoking), Some(_)) = (r.smoking, r.covariates.area) else {
            return Err(Error::Parse {
                row,
                message: "truth rows need smoking and area".into(),
            });
        };
        out.push(TruthRecord {
            id: r.id,
            covariates: r.covariates,
            smoking,
            event_age: real(11)?,
            censor_age: real(12)?,
            sampled: r.sampled,
            participated: r.participated,
            inclusion_probability: r.inclusion_probability,
        });
    }
    Ok(out)
}
