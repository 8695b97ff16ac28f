use std::fmt;

use super::{DesignSpec, PersonRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    ParticipationWithoutSampling,
    SmokingPresenceMismatch,
    FollowUpPresenceMismatch,
    FollowUpNotAfterBaseline,
    FollowUpBeyondBound,
    InclusionProbabilityOutOfRange,
    NoDesignForYear,
    AreaNotInWave,
    MissingAreaNotAllowed,
    AgeOutsideCohort,
}

impl ViolationKind {
    pub fn describe(self) -> &'static str {
        match self {
            ViolationKind::ParticipationWithoutSampling => "participation without sampling",
            ViolationKind::SmokingPresenceMismatch => "smoking status present iff participated",
            ViolationKind::FollowUpPresenceMismatch => "follow-up present iff sampled",
            ViolationKind::FollowUpNotAfterBaseline => "follow-up not after baseline",
            ViolationKind::FollowUpBeyondBound => "follow-up beyond censoring bound",
            ViolationKind::InclusionProbabilityOutOfRange => "inclusion probability outside (0, 1]",
            ViolationKind::NoDesignForYear => "no design for study year",
            ViolationKind::AreaNotInWave => "area not surveyed in this wave",
            ViolationKind::MissingAreaNotAllowed => "missing area outside the 1972/1977 non-participants",
            ViolationKind::AgeOutsideCohort => "age outside eligible cohort",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Zero-based position in the input slice.
    pub index: usize,
    pub id: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {} ({}): {}", self.id, self.index, self.kind.describe())?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// Upper bound on recorded event or censoring ages.
    pub max_event_age: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { max_event_age: 120.0 }
    }
}

/// Lists every invariant violation; an empty result means the dataset is valid.
pub fn validate_dataset(records: &[PersonRecord], designs: &[DesignSpec], opts: &ValidationOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    for (index, r) in records.iter().enumerate() {
        let mut flag = |kind: ViolationKind, detail: String| {
            out.push(Violation {
                index,
                id: r.id.clone(),
                kind,
                detail,
            })
        };
        let c = &r.covariates;

        if r.participated && !r.sampled {
            flag(ViolationKind::ParticipationWithoutSampling, String::new());
        }
        if r.smoking.is_some() != r.participated {
            flag(
                ViolationKind::SmokingPresenceMismatch,
                format!("participated={} smoking={:?}", r.participated, r.smoking),
            );
        }
        if r.followup.is_some() != r.sampled {
            flag(ViolationKind::FollowUpPresenceMismatch, format!("sampled={}", r.sampled));
        }
        if let Some(fu) = r.followup {
            // an event needs positive follow-up time; censoring at baseline is zero exposure
            let before = if fu.event_observed {
                fu.event_age <= c.age_at_baseline
            } else {
                fu.event_age < c.age_at_baseline
            };
            if before {
                flag(
                    ViolationKind::FollowUpNotAfterBaseline,
                    format!("event_age {} vs baseline {}", fu.event_age, c.age_at_baseline),
                );
            }
            if fu.event_age > opts.max_event_age {
                flag(
                    ViolationKind::FollowUpBeyondBound,
                    format!("event_age {} > {}", fu.event_age, opts.max_event_age),
                );
            }
        }
        if !(r.inclusion_probability > 0.0 && r.inclusion_probability <= 1.0) {
            flag(
                ViolationKind::InclusionProbabilityOutOfRange,
                format!("{}", r.inclusion_probability),
            );
        }

        let Some(design) = designs.iter().find(|d| d.year == c.study_year) else {
            flag(ViolationKind::NoDesignForYear, c.study_year.to_string());
            continue;
        };
        match c.area {
            Some(area) => match design.eligibility(area) {
                None => flag(ViolationKind::AreaNotInWave, format!("area {area} in {}", c.study_year)),
                Some(e) if !e.contains(c.age_at_baseline) => flag(
                    ViolationKind::AgeOutsideCohort,
                    format!("age {} not in {}-{}", c.age_at_baseline, e.min_age, e.max_age),
                ),
                Some(_) => {}
            },
            None => {
                if r.participated || !c.study_year.has_area_loss() {
                    flag(ViolationKind::MissingAreaNotAllowed, c.study_year.to_string());
                }
                if !design.areas.iter().any(|e| e.contains(c.age_at_baseline)) {
                    flag(ViolationKind::AgeOutsideCohort, format!("age {}", c.age_at_baseline));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Area, Covariates, FollowUp, Gender, StudyYear};

    fn fixture() -> Vec<PersonRecord> {
        let cov = |age| Covariates::new(age, Area::NorthKarelia, Gender::Man, StudyYear::Y1972);
        vec![
            PersonRecord {
                id: "a".into(),
                covariates: cov(30.0),
                sampled: true,
                participated: true,
                smoking: Some(true),
                followup: Some(FollowUp {
                    event_age: 55.0,
                    event_observed: true,
                }),
                inclusion_probability: 0.5,
            },
            PersonRecord {
                id: "b".into(),
                covariates: Covariates {
                    area: None,
                    ..cov(41.0)
                },
                sampled: true,
                participated: false,
                smoking: None,
                followup: Some(FollowUp {
                    event_age: 80.0,
                    event_observed: false,
                }),
                inclusion_probability: 0.5,
            },
            PersonRecord {
                id: "c".into(),
                covariates: cov(58.5),
                sampled: false,
                participated: false,
                smoking: None,
                followup: None,
                inclusion_probability: 0.5,
            },
        ]
    }

    fn kinds(rs: &[PersonRecord]) -> Vec<ViolationKind> {
        validate_dataset(rs, &DesignSpec::finrisk_all(), &ValidationOptions::default())
            .into_iter()
            .map(|v| v.kind)
            .collect()
    }

    #[test]
    fn consistent_fixture_is_clean() {
        assert!(kinds(&fixture()).is_empty());
    }

    #[test]
    fn participation_without_sampling() {
        let mut rs = fixture();
        rs[2].participated = true;
        rs[2].smoking = Some(false);
        rs[2].followup = Some(FollowUp {
            event_age: 60.0,
            event_observed: false,
        });
        assert_eq!(
            kinds(&rs),
            vec![ViolationKind::ParticipationWithoutSampling, ViolationKind::FollowUpPresenceMismatch]
        );
    }

    #[test]
    fn event_at_baseline() {
        let mut rs = fixture();
        rs[0].followup = Some(FollowUp {
            event_age: 30.0,
            event_observed: true,
        });
        let v = validate_dataset(&rs, &DesignSpec::finrisk_all(), &ValidationOptions::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind.describe(), "follow-up not after baseline");
    }

    #[test]
    fn area_and_age_checks() {
        let mut rs = fixture();
        rs[0].covariates.area = Some(Area::Oulu);
        rs[2].covariates.age_at_baseline = 60.0;
        rs[1].covariates.study_year = StudyYear::Y1982;
        rs[1].covariates.age_at_baseline = 41.0;
        assert_eq!(
            kinds(&rs),
            vec![
                ViolationKind::AreaNotInWave,
                ViolationKind::MissingAreaNotAllowed,
                ViolationKind::AgeOutsideCohort
            ]
        );
    }

    #[test]
    fn validation_does_not_mutate() {
        let rs = fixture();
        let copy = rs.clone();
        let _ = kinds(&rs);
        assert_eq!(rs, copy);
    }
}
