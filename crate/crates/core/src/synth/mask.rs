use rand::Rng;

use super::truth::TruthRecord;
use crate::domain::PersonRecord;
use crate::rng;

/// The survey's view of the truth: smoking hidden for non-participants,
/// follow-up hidden for the non-sampled, and the area of 1972/1977
/// non-participants erased with probability `area_loss_rate`. Non-sampled
/// persons are dropped unless `keep_unsampled`.
pub fn mask(truth: &[TruthRecord], area_loss_rate: f64, seed: u64, keep_unsampled: bool) -> Vec<PersonRecord> {
    truth
        .iter()
        .enumerate()
        .filter(|(_, t)| keep_unsampled || t.sampled)
        .map(|(i, t)| {
            let mut r = t.unmasked();
            if !t.participated {
                r.smoking = None;
            }
            if !t.sampled {
                r.followup = None;
            }
            if t.sampled && !t.participated && t.covariates.study_year.has_area_loss() && area_loss_rate > 0.0 {
                let u: f64 = rng::stream(seed, rng::domain::MASK, i as u64).random();
                if u < area_loss_rate {
                    r.covariates.area = None;
                }
            }
            r
        })
        .collect()
}
