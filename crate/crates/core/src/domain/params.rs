use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Area, Gender, Stratum, StudyYear};
use crate::error::{Error, Result};

/// Number of survival regression coefficients on `log b`.
pub const N_GAMMA: usize = 22;

/// One coefficient of the survival linear predictor.
///
/// North Karelia, 1972 and men are reference levels, so there are no
/// coefficients for them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaTerm {
    Intercept,
    Woman,
    Smoking,
    WomanSmoking,
    Area(Area),
    WomanArea(Area),
    Year(StudyYear),
    WomanYear(StudyYear),
}

impl GammaTerm {
    pub fn index(self) -> Option<usize> {
        match self {
            GammaTerm::Intercept => Some(0),
            GammaTerm::Woman => Some(1),
            GammaTerm::Smoking => Some(2),
            GammaTerm::WomanSmoking => Some(3),
            GammaTerm::Area(a) => a.contrast_index().map(|i| 4 + i),
            GammaTerm::WomanArea(a) => a.contrast_index().map(|i| 8 + i),
            GammaTerm::Year(y) => y.contrast_index().map(|i| 12 + i),
            GammaTerm::WomanYear(y) => y.contrast_index().map(|i| 17 + i),
        }
    }

    pub fn from_index(i: usize) -> Option<GammaTerm> {
        let area = |k: usize| Area::ALL[k + 1];
        let year = |k: usize| StudyYear::ALL[k + 1];
        Some(match i {
            0 => GammaTerm::Intercept,
            1 => GammaTerm::Woman,
            2 => GammaTerm::Smoking,
            3 => GammaTerm::WomanSmoking,
            4..=7 => GammaTerm::Area(area(i - 4)),
            8..=11 => GammaTerm::WomanArea(area(i - 8)),
            12..=16 => GammaTerm::Year(year(i - 12)),
            17..=21 => GammaTerm::WomanYear(year(i - 17)),
            _ => return None,
        })
    }

    /// Conventional label, e.g. `gamma0`, `gamma45` (Helsinki and Vantaa), `gamma76` (women × 1997).
    pub fn name(self) -> String {
        match self {
            GammaTerm::Intercept => "gamma0".into(),
            GammaTerm::Woman => "gamma1".into(),
            GammaTerm::Smoking => "gamma2".into(),
            GammaTerm::WomanSmoking => "gamma3".into(),
            GammaTerm::Area(a) => format!("gamma4{}", a.code()),
            GammaTerm::WomanArea(a) => format!("gamma5{}", a.code()),
            GammaTerm::Year(y) => format!("gamma6{}", y.index() + 1),
            GammaTerm::WomanYear(y) => format!("gamma7{}", y.index() + 1),
        }
    }

    pub fn all() -> impl Iterator<Item = GammaTerm> {
        (0..N_GAMMA).filter_map(GammaTerm::from_index)
    }

    pub fn from_name(name: &str) -> Option<GammaTerm> {
        GammaTerm::all().find(|t| t.name() == name)
    }
}

/// The survival coefficients in fixed order
/// `gamma0, gamma1, gamma2, gamma3, gamma43..46, gamma53..56, gamma62..66, gamma72..76`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct SurvivalCoefficients(pub [f64; N_GAMMA]);

impl SurvivalCoefficients {
    pub fn get(&self, term: GammaTerm) -> f64 {
        term.index().map_or(0.0, |i| self.0[i])
    }

    pub fn set(&mut self, term: GammaTerm, value: f64) {
        if let Some(i) = term.index() {
            self.0[i] = value;
        }
    }

    pub fn intercept(&self) -> f64 {
        self.0[0]
    }

    pub fn woman(&self) -> f64 {
        self.0[1]
    }

    pub fn smoking(&self) -> f64 {
        self.0[2]
    }

    pub fn woman_smoking(&self) -> f64 {
        self.0[3]
    }

    pub fn area(&self, area: Area) -> f64 {
        self.get(GammaTerm::Area(area))
    }

    pub fn woman_area(&self, area: Area) -> f64 {
        self.get(GammaTerm::WomanArea(area))
    }

    pub fn year(&self, year: StudyYear) -> f64 {
        self.get(GammaTerm::Year(year))
    }

    pub fn woman_year(&self, year: StudyYear) -> f64 {
        self.get(GammaTerm::WomanYear(year))
    }

    /// Posterior means reported for the historical registry-linked data.
    pub fn finrisk_posterior_means() -> Self {
        SurvivalCoefficients([
            -21.848, -1.352, 1.772, 0.559, // intercept, women, smoking, women × smoking
            0.070, -0.298, -0.389, -1.290, // areas 3..6
            -0.274, 0.654, 0.509, 1.072, // women × areas 3..6
            -0.242, 0.017, -0.090, -0.185, 0.134, // 1977..1997
            0.269, -0.240, 0.182, 0.506, 0.343, // women × 1977..1997
        ])
    }
}

impl From<SurvivalCoefficients> for BTreeMap<String, f64> {
    fn from(c: SurvivalCoefficients) -> Self {
        GammaTerm::all().map(|t| (t.name(), c.get(t))).collect()
    }
}

impl TryFrom<BTreeMap<String, f64>> for SurvivalCoefficients {
    type Error = String;
    fn try_from(map: BTreeMap<String, f64>) -> std::result::Result<Self, Self::Error> {
        let mut c = SurvivalCoefficients::default();
        for (name, v) in map {
            let term = GammaTerm::from_name(&name).ok_or_else(|| format!("unknown survival coefficient {name:?}"))?;
            c.set(term, v);
        }
        Ok(c)
    }
}

/// Smoking-model intercept (at birth year 1930) and birth-year slope of one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEntry {
    pub area: Area,
    pub year: StudyYear,
    pub gender: Gender,
    pub alpha0: f64,
    pub alpha1: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelParamsRepr {
    shape_a: f64,
    gamma: SurvivalCoefficients,
    #[serde(default)]
    alpha: Vec<AlphaEntry>,
}

/// Full parameter set of the joint smoking/survival model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParamsRepr", into = "ModelParamsRepr")]
pub struct ModelParams {
    pub shape_a: f64,
    pub gamma: SurvivalCoefficients,
    pub alpha0: BTreeMap<Stratum, f64>,
    pub alpha1: BTreeMap<Stratum, f64>,
}

impl From<ModelParams> for ModelParamsRepr {
    fn from(p: ModelParams) -> Self {
        let alpha = p
            .alpha0
            .iter()
            .map(|(s, &a0)| AlphaEntry {
                area: s.area,
                year: s.year,
                gender: s.gender,
                alpha0: a0,
                alpha1: p.alpha1.get(s).copied().unwrap_or(0.0),
            })
            .collect();
        ModelParamsRepr {
            shape_a: p.shape_a,
            gamma: p.gamma,
            alpha,
        }
    }
}

impl TryFrom<ModelParamsRepr> for ModelParams {
    type Error = String;
    fn try_from(r: ModelParamsRepr) -> std::result::Result<Self, Self::Error> {
        if !(r.shape_a > 0.0) {
            return Err(format!("shape_a must be positive, got {}", r.shape_a));
        }
        let mut alpha0 = BTreeMap::new();
        let mut alpha1 = BTreeMap::new();
        for e in r.alpha {
            let s = Stratum::new(e.area, e.year, e.gender);
            if alpha0.insert(s, e.alpha0).is_some() {
                return Err(format!("stratum {s} listed twice"));
            }
            alpha1.insert(s, e.alpha1);
        }
        Ok(ModelParams {
            shape_a: r.shape_a,
            gamma: r.gamma,
            alpha0,
            alpha1,
        })
    }
}

impl ModelParams {
    /// Parameters with every stratum's smoking coefficients set to the same pair.
    pub fn uniform(
        shape_a: f64,
        gamma: SurvivalCoefficients,
        strata: impl IntoIterator<Item = Stratum>,
        alpha0: f64,
        alpha1: f64,
    ) -> Self {
        let strata: Vec<Stratum> = strata.into_iter().collect();
        ModelParams {
            shape_a,
            gamma,
            alpha0: strata.iter().map(|&s| (s, alpha0)).collect(),
            alpha1: strata.iter().map(|&s| (s, alpha1)).collect(),
        }
    }

    pub fn alpha(&self, stratum: Stratum) -> Result<(f64, f64)> {
        match (self.alpha0.get(&stratum), self.alpha1.get(&stratum)) {
            (Some(&a0), Some(&a1)) => Ok((a0, a1)),
            _ => Err(Error::MissingStratum(stratum)),
        }
    }

    pub fn set_alpha(&mut self, stratum: Stratum, alpha0: f64, alpha1: f64) {
        self.alpha0.insert(stratum, alpha0);
        self.alpha1.insert(stratum, alpha1);
    }

    pub fn strata(&self) -> impl Iterator<Item = Stratum> + '_ {
        self.alpha0.keys().copied()
    }

    /// Smoking coefficients reported for North Karelia, indexed by (year, gender).
    pub fn finrisk_north_karelia_alpha(year: StudyYear, gender: Gender) -> (f64, f64) {
        const MEN0: [f64; 6] = [0.086, -0.294, -0.672, -0.888, -1.092, -1.449];
        const WOMEN0: [f64; 6] = [-2.106, -2.452, -2.361, -2.412, -2.599, -2.833];
        const MEN1: [f64; 6] = [0.001, 0.008, 0.013, 0.019, 0.017, 0.029];
        const WOMEN1: [f64; 6] = [0.043, 0.050, 0.057, 0.049, 0.049, 0.049];
        let i = year.index();
        match gender {
            Gender::Man => (MEN0[i], MEN1[i]),
            Gender::Woman => (WOMEN0[i], WOMEN1[i]),
        }
    }

    /// Checks positivity of the shape and that the smoking strata are exactly `expected`.
    pub fn validate(&self, expected: &[Stratum]) -> Result<()> {
        if !(self.shape_a > 0.0 && self.shape_a.is_finite()) {
            return Err(Error::Domain(format!("shape_a must be positive, got {}", self.shape_a)));
        }
        if let Some(i) = self.gamma.0.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(GammaTerm::from_index(i).unwrap().name()));
        }
        for s in expected {
            self.alpha(*s)?;
        }
        if let Some(extra) = self.alpha0.keys().find(|s| !expected.contains(s)) {
            return Err(Error::Domain(format!("smoking coefficients for ineligible stratum {extra}")));
        }
        if self.alpha0.len() != self.alpha1.len() {
            return Err(Error::Domain("alpha0 and alpha1 cover different strata".into()));
        }
        Ok(())
    }
}
