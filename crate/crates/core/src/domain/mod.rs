//! Shared data types: persons, covariates, follow-up, model parameters,
//! survey designs, standardization tables and posterior draws.

mod design;
mod draws;
pub mod io;
mod params;
mod standardization;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use design::{AreaEligibility, DesignSpec, SamplingScheme};
pub use draws::{PosteriorDraws, RunMeta};
pub use params::{AlphaEntry, GammaTerm, ModelParams, SurvivalCoefficients, N_GAMMA};
pub(crate) use design::strata_of;
pub use standardization::{AgeBand, StandardizationTable};
pub use validate::{validate_dataset, ValidationOptions, Violation, ViolationKind};

/// Study area. Numeric codes follow the survey's own coding (2..=6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Area {
    NorthKarelia,
    NorthernSavonia,
    TurkuLoimaa,
    HelsinkiVantaa,
    Oulu,
}

impl Area {
    pub const ALL: [Area; 5] = [
        Area::NorthKarelia,
        Area::NorthernSavonia,
        Area::TurkuLoimaa,
        Area::HelsinkiVantaa,
        Area::Oulu,
    ];

    pub fn code(self) -> u8 {
        match self {
            Area::NorthKarelia => 2,
            Area::NorthernSavonia => 3,
            Area::TurkuLoimaa => 4,
            Area::HelsinkiVantaa => 5,
            Area::Oulu => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Area> {
        Area::ALL.into_iter().find(|a| a.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Area::NorthKarelia => "North Karelia",
            Area::NorthernSavonia => "Northern Savonia",
            Area::TurkuLoimaa => "Turku and Loimaa",
            Area::HelsinkiVantaa => "Helsinki and Vantaa",
            Area::Oulu => "Oulu province",
        }
    }

    /// Position among the non-reference areas (North Karelia is the reference).
    pub(crate) fn contrast_index(self) -> Option<usize> {
        match self {
            Area::NorthKarelia => None,
            other => Some(other.code() as usize - 3),
        }
    }
}

impl TryFrom<u8> for Area {
    type Error = String;
    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Area::from_code(code).ok_or_else(|| format!("unknown area code {code}"))
    }
}

impl From<Area> for u8 {
    fn from(a: Area) -> u8 {
        a.code()
    }
}

impl fmt::Display for Area {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Man,
    Woman,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Man, Gender::Woman];

    /// The 0/1 gender covariate (women = 1).
    pub fn indicator(self) -> f64 {
        match self {
            Gender::Man => 0.0,
            Gender::Woman => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Man => "man",
            Gender::Woman => "woman",
        }
    }

    pub fn parse(s: &str) -> Option<Gender> {
        match s {
            "man" => Some(Gender::Man),
            "woman" => Some(Gender::Woman),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Survey wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum StudyYear {
    Y1972,
    Y1977,
    Y1982,
    Y1987,
    Y1992,
    Y1997,
}

impl StudyYear {
    pub const ALL: [StudyYear; 6] = [
        StudyYear::Y1972,
        StudyYear::Y1977,
        StudyYear::Y1982,
        StudyYear::Y1987,
        StudyYear::Y1992,
        StudyYear::Y1997,
    ];

    pub fn year(self) -> u16 {
        1972 + 5 * self.index() as u16
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_year(year: u16) -> Option<StudyYear> {
        StudyYear::ALL.into_iter().find(|y| y.year() == year)
    }

    /// Position among the non-reference waves (1972 is the reference).
    pub(crate) fn contrast_index(self) -> Option<usize> {
        self.index().checked_sub(1)
    }

    /// Waves in which the area of some non-participants was lost.
    pub fn has_area_loss(self) -> bool {
        matches!(self, StudyYear::Y1972 | StudyYear::Y1977)
    }
}

impl TryFrom<u16> for StudyYear {
    type Error = String;
    fn try_from(y: u16) -> Result<Self, Self::Error> {
        StudyYear::from_year(y).ok_or_else(|| format!("unknown study year {y}"))
    }
}

impl From<StudyYear> for u16 {
    fn from(y: StudyYear) -> u16 {
        y.year()
    }
}

impl fmt::Display for StudyYear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.year())
    }
}

/// Key of the stratified smoking model: one intercept/slope pair per stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stratum {
    pub area: Area,
    pub year: StudyYear,
    pub gender: Gender,
}

impl Stratum {
    pub fn new(area: Area, year: StudyYear, gender: Gender) -> Self {
        Stratum { area, year, gender }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.area, self.year, self.gender)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub age_at_baseline: f64,
    /// `None` only for the non-participants whose area record was lost.
    pub area: Option<Area>,
    pub gender: Gender,
    pub study_year: StudyYear,
}

impl Covariates {
    pub fn new(age_at_baseline: f64, area: Area, gender: Gender, study_year: StudyYear) -> Self {
        Covariates {
            age_at_baseline,
            area: Some(area),
            gender,
            study_year,
        }
    }

    pub fn birth_year(&self) -> f64 {
        f64::from(self.study_year.year()) - self.age_at_baseline
    }

    pub fn stratum(&self) -> Option<Stratum> {
        self.area.map(|area| Stratum::new(area, self.study_year, self.gender))
    }
}

/// Registry follow-up: age at diagnosis, or age at end of follow-up when censored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowUp {
    pub event_age: f64,
    pub event_observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub id: String,
    pub covariates: Covariates,
    pub sampled: bool,
    pub participated: bool,
    pub smoking: Option<bool>,
    pub followup: Option<FollowUp>,
    pub inclusion_probability: f64,
}

impl PersonRecord {
    pub fn design_weight(&self) -> f64 {
        1.0 / self.inclusion_probability
    }

    pub fn is_nonparticipant(&self) -> bool {
        self.sampled && !self.participated
    }
}
