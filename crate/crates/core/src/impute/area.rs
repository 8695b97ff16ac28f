use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Area, PersonRecord, StudyYear};
use crate::error::{Error, Result};

/// Probability that a 1972 or 1977 non-participant with unrecorded area lived
/// in Northern Savonia; otherwise the area is North Karelia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaProbabilities {
    pub northern_savonia_1972: f64,
    pub northern_savonia_1977: f64,
}

impl Default for AreaProbabilities {
    fn default() -> Self {
        AreaProbabilities {
            northern_savonia_1972: 0.495,
            northern_savonia_1977: 0.493,
        }
    }
}

impl AreaProbabilities {
    pub fn validate(&self) -> Result<()> {
        for p in [self.northern_savonia_1972, self.northern_savonia_1977] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("area probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn northern_savonia(&self, year: StudyYear) -> Result<f64> {
        match year {
            StudyYear::Y1972 => Ok(self.northern_savonia_1972),
            StudyYear::Y1977 => Ok(self.northern_savonia_1977),
            other => Err(Error::Domain(format!("area imputation is only defined for 1972 and 1977, not {other}"))),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, year: StudyYear, rng: &mut R) -> Result<Area> {
        let p = self.northern_savonia(year)?;
        Ok(if rng.random::<f64>() < p {
            Area::NorthernSavonia
        } else {
            Area::NorthKarelia
        })
    }
}

/// Fills every missing area in place. Records with a known area are untouched.
pub fn impute_area<R: Rng + ?Sized>(records: &mut [PersonRecord], probs: &AreaProbabilities, rng: &mut R) -> Result<()> {
    probs.validate()?;
    for r in records.iter_mut().filter(|r| r.covariates.area.is_none()) {
        r.covariates.area = Some(probs.draw(r.covariates.study_year, rng).map_err(|e| match e {
            Error::Domain(m) => Error::Domain(format!("record {}: {m}", r.id)),
            other => other,
        })?);
    }
    Ok(())
}
