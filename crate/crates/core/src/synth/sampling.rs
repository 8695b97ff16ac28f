use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::truth::TruthRecord;
use crate::domain::{DesignSpec, Gender, SamplingScheme, StudyYear};
use crate::error::{Error, Result};
use crate::rng;

/// A stratum whose quota exceeded its population; everyone in it was sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub year: StudyYear,
    pub stratum: String,
    pub quota: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    /// Population indices eligible for this wave, in population order.
    pub members: Vec<usize>,
    /// Inclusion probability of each member.
    pub inclusion_probability: Vec<f64>,
    /// Sampled population indices, sorted.
    pub selected: Vec<usize>,
    pub shortfalls: Vec<Shortfall>,
}

#[derive(Debug)]
struct SamplingStratum {
    label: String,
    members: Vec<usize>,
}

fn strata_layout(design: &DesignSpec) -> Vec<(String, usize, Option<usize>, Option<Gender>)> {
    let mut out = Vec::new();
    for (pos, e) in design.areas.iter().enumerate() {
        match design.scheme {
            SamplingScheme::SystematicBirthdate | SamplingScheme::SimpleRandom => {
                out.push((format!("{} area {}", design.year, e.area.code()), pos, None, None));
            }
            SamplingScheme::BalancedAge => {
                for (g, (lo, hi)) in e.age_groups().into_iter().enumerate() {
                    out.push((format!("{} area {} ages {lo}-{hi}", design.year, e.area.code()), pos, Some(g), None));
                }
            }
            SamplingScheme::BalancedAgeGender => {
                for (g, (lo, hi)) in e.age_groups().into_iter().enumerate() {
                    for gender in Gender::ALL {
                        out.push((
                            format!("{} area {} ages {lo}-{hi} {gender}", design.year, e.area.code()),
                            pos,
                            Some(g),
                            Some(gender),
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Draws one wave's sample. Quotas are the target size split evenly over the
/// design strata (areas, age groups within areas, or age groups within area
/// and gender), remainders going to the first strata. Inclusion probability
/// is `quota / stratum size`.
pub fn draw_sample(population: &[TruthRecord], design: &DesignSpec, seed: u64) -> Result<SampleDraw> {
    design.validate()?;
    let layout = strata_layout(design);
    let mut strata: Vec<SamplingStratum> = layout
        .iter()
        .map(|(label, ..)| SamplingStratum {
            label: label.clone(),
            members: Vec::new(),
        })
        .collect();
    for (i, t) in population.iter().enumerate() {
        let c = &t.covariates;
        if c.study_year != design.year {
            continue;
        }
        let Some(area) = c.area else { continue };
        let Some(pos) = design.areas.iter().position(|e| e.area == area) else {
            continue;
        };
        let e = &design.areas[pos];
        let Some(group) = e.age_group_of(c.age_at_baseline) else {
            continue;
        };
        let k = layout
            .iter()
            .position(|(_, p, g, gender)| {
                *p == pos && g.is_none_or(|g| g == group) && gender.is_none_or(|gd| gd == c.gender)
            })
            .expect("every eligible person falls in a stratum");
        strata[k].members.push(i);
    }
    if let Some(empty) = strata.iter().find(|s| s.members.is_empty()) {
        return Err(Error::EmptyStratum(empty.label.clone()));
    }

    let n = design.target_sample_size;
    let s = strata.len();
    let mut members = Vec::new();
    let mut probs = Vec::new();
    let mut selected = Vec::new();
    let mut shortfalls = Vec::new();
    for (k, st) in strata.iter().enumerate() {
        let quota = n / s + usize::from(k < n % s);
        let size = st.members.len();
        let take = quota.min(size);
        if take < quota {
            shortfalls.push(Shortfall {
                year: design.year,
                stratum: st.label.clone(),
                quota,
                available: size,
            });
        }
        let p = take as f64 / size as f64;
        let mut r = rng::stream(seed, rng::domain::SAMPLING, u64::from(design.year.year()) * 1000 + k as u64);
        selected.extend(index::sample(&mut r, size, take).into_iter().map(|j| st.members[j]));
        for &m in &st.members {
            members.push(m);
            probs.push(p);
        }
    }
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by_key(|&j| members[j]);
    let members_sorted = order.iter().map(|&j| members[j]).collect();
    let probs_sorted = order.iter().map(|&j| probs[j]).collect();
    selected.sort_unstable();
    Ok(SampleDraw {
        members: members_sorted,
        inclusion_probability: probs_sorted,
        selected,
        shortfalls,
    })
}
