use serde::{Deserialize, Serialize};

use super::{Area, Gender, Stratum, StudyYear};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    /// Systematic on birthdate, balanced between areas. Drawn as simple random
    /// sampling within area, which has the same inclusion probabilities when
    /// birthdays are uniform.
    SystematicBirthdate,
    /// Simple random sampling, balanced between areas.
    SimpleRandom,
    /// Balanced between 10-year age groups within areas.
    BalancedAge,
    /// Balanced between 10-year age groups within areas and gender.
    BalancedAgeGender,
}

/// Eligible ages in whole years, both ends inclusive. A fractional age `x`
/// is eligible when `min_age <= x < max_age + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaEligibility {
    pub area: Area,
    pub min_age: u32,
    pub max_age: u32,
}

impl AreaEligibility {
    pub fn lower(&self) -> f64 {
        f64::from(self.min_age)
    }

    pub fn upper_exclusive(&self) -> f64 {
        f64::from(self.max_age) + 1.0
    }

    pub fn contains(&self, age: f64) -> bool {
        age >= self.lower() && age < self.upper_exclusive()
    }

    /// 10-year groups starting at `min_age`; the last group may be shorter.
    pub fn age_groups(&self) -> Vec<(f64, f64)> {
        let mut groups = Vec::new();
        let mut lo = self.lower();
        while lo < self.upper_exclusive() {
            let hi = (lo + 10.0).min(self.upper_exclusive());
            groups.push((lo, hi));
            lo = hi;
        }
        groups
    }

    pub fn age_group_of(&self, age: f64) -> Option<usize> {
        if !self.contains(age) {
            return None;
        }
        Some((((age - self.lower()) / 10.0).floor() as usize).min(self.age_groups().len() - 1))
    }
}

/// One survey wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub year: StudyYear,
    pub areas: Vec<AreaEligibility>,
    pub scheme: SamplingScheme,
    pub target_sample_size: usize,
    /// Marginal participation rate the synthetic participation model is calibrated to.
    pub target_participation_rate: f64,
}

impl DesignSpec {
    /// Historical wave layout: cohorts, areas, scheme, sample size and marginal participation.
    ///
    /// The 1997 upper age for areas 2 and 5 is 74 inclusive; see `with_age_cap` to change it.
    pub fn finrisk(year: StudyYear) -> DesignSpec {
        use Area::*;
        let (areas, min, max, scheme, n, rate): (&[Area], u32, u32, SamplingScheme, usize, f64) =
            match year {
                StudyYear::Y1972 => (
                    &[NorthKarelia, NorthernSavonia],
                    25,
                    59,
                    SamplingScheme::SystematicBirthdate,
                    12377,
                    0.860,
                ),
                StudyYear::Y1977 => (
                    &[NorthKarelia, NorthernSavonia],
                    30,
                    64,
                    SamplingScheme::SimpleRandom,
                    11319,
                    0.881,
                ),
                StudyYear::Y1982 => (
                    &[NorthKarelia, NorthernSavonia, TurkuLoimaa],
                    25,
                    64,
                    SamplingScheme::BalancedAge,
                    11332,
                    0.800,
                ),
                StudyYear::Y1987 => (
                    &[NorthKarelia, NorthernSavonia, TurkuLoimaa],
                    25,
                    64,
                    SamplingScheme::BalancedAgeGender,
                    7893,
                    0.799,
                ),
                StudyYear::Y1992 => (
                    &[NorthKarelia, NorthernSavonia, TurkuLoimaa, HelsinkiVantaa],
                    25,
                    64,
                    SamplingScheme::BalancedAgeGender,
                    7895,
                    0.762,
                ),
                StudyYear::Y1997 => (
                    &[NorthKarelia, NorthernSavonia, TurkuLoimaa, HelsinkiVantaa, Oulu],
                    25,
                    64,
                    SamplingScheme::BalancedAgeGender,
                    11423,
                    0.713,
                ),
            };
        let areas = areas
            .iter()
            .map(|&area| {
                let max_age = if year == StudyYear::Y1997 && matches!(area, NorthKarelia | HelsinkiVantaa) {
                    74
                } else {
                    max
                };
                AreaEligibility {
                    area,
                    min_age: min,
                    max_age,
                }
            })
            .collect();
        DesignSpec {
            year,
            areas,
            scheme,
            target_sample_size: n,
            target_participation_rate: rate,
        }
    }

    pub fn finrisk_all() -> Vec<DesignSpec> {
        StudyYear::ALL.into_iter().map(DesignSpec::finrisk).collect()
    }

    /// Overrides the upper eligible age of one area.
    pub fn with_age_cap(mut self, area: Area, max_age: u32) -> Self {
        for e in self.areas.iter_mut().filter(|e| e.area == area) {
            e.max_age = max_age;
        }
        self
    }

    pub fn eligibility(&self, area: Area) -> Option<&AreaEligibility> {
        self.areas.iter().find(|e| e.area == area)
    }

    pub fn has_area(&self, area: Area) -> bool {
        self.eligibility(area).is_some()
    }

    /// Smoking-model strata of this wave.
    pub fn strata(&self) -> Vec<Stratum> {
        self.areas
            .iter()
            .flat_map(|e| Gender::ALL.into_iter().map(move |g| Stratum::new(e.area, self.year, g)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.areas.is_empty() {
            return Err(Error::Config(format!("wave {} has no areas", self.year)));
        }
        for (i, e) in self.areas.iter().enumerate() {
            if e.min_age > e.max_age {
                return Err(Error::Config(format!(
                    "wave {} area {}: min_age {} exceeds max_age {}",
                    self.year, e.area, e.min_age, e.max_age
                )));
            }
            if self.areas[..i].iter().any(|o| o.area == e.area) {
                return Err(Error::Config(format!("wave {} lists area {} twice", self.year, e.area)));
            }
        }
        if self.target_sample_size == 0 {
            return Err(Error::Config(format!("wave {} has zero target sample size", self.year)));
        }
        if !(self.target_participation_rate > 0.0 && self.target_participation_rate <= 1.0) {
            return Err(Error::Config(format!(
                "wave {} participation rate {} outside (0, 1]",
                self.year, self.target_participation_rate
            )));
        }
        Ok(())
    }

    /// Checks that the areas of this wave are the historical ones.
    pub fn check_against_history(&self) -> Result<()> {
        let reference = DesignSpec::finrisk(self.year);
        for e in &self.areas {
            if !reference.has_area(e.area) {
                return Err(Error::AreaNotInWave {
                    area: e.area,
                    year: self.year,
                });
            }
        }
        Ok(())
    }
}

/// All smoking strata across a set of waves, sorted.
pub(crate) fn strata_of(designs: &[DesignSpec]) -> Vec<Stratum> {
    let mut s: Vec<Stratum> = designs.iter().flat_map(DesignSpec::strata).collect();
    s.sort();
    s.dedup();
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn historical_strata_count() {
        // 2+2+3+3+4+5 areas, two genders each
        assert_eq!(strata_of(&DesignSpec::finrisk_all()).len(), 38);
    }

    #[test]
    fn preset_1997_caps() {
        let d = DesignSpec::finrisk(StudyYear::Y1997);
        assert_eq!(d.eligibility(Area::NorthKarelia).unwrap().max_age, 74);
        assert_eq!(d.eligibility(Area::HelsinkiVantaa).unwrap().max_age, 74);
        assert_eq!(d.eligibility(Area::NorthernSavonia).unwrap().max_age, 64);
        assert_eq!(d.eligibility(Area::NorthKarelia).unwrap().age_groups().len(), 5);
        let d = d.with_age_cap(Area::NorthKarelia, 75);
        assert!(d.eligibility(Area::NorthKarelia).unwrap().contains(75.5));
    }

    #[test]
    fn partial_last_age_group() {
        let e = AreaEligibility {
            area: Area::NorthKarelia,
            min_age: 25,
            max_age: 59,
        };
        assert_eq!(e.age_groups(), vec![(25.0, 35.0), (35.0, 45.0), (45.0, 55.0), (55.0, 60.0)]);
        assert_eq!(e.age_group_of(59.99), Some(3));
        assert_eq!(e.age_group_of(60.0), None);
    }

    #[test]
    fn oulu_only_in_1997() {
        let mut d = DesignSpec::finrisk(StudyYear::Y1972);
        d.areas.push(AreaEligibility {
            area: Area::Oulu,
            min_age: 25,
            max_age: 59,
        });
        assert!(matches!(d.check_against_history(), Err(Error::AreaNotInWave { .. })));
    }
}
