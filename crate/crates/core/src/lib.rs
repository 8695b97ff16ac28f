//! Correcting risk-factor prevalence for non-ignorable survey non-participation
//! using registry follow-up.
//!
//! The pipeline is: simulate a cohort ([`synth`]), fit the joint smoking and
//! left-truncated Weibull survival model to participants ([`likelihood`],
//! [`mcmc`]), impute smoking for non-participants from the posterior
//! predictive ([`impute`]) and turn the completed samples into design-weighted,
//! age-standardized prevalence trends ([`prevalence`]).

pub mod domain;
pub mod error;
pub mod rng;
pub mod stats;

pub use domain::{
    Area, Covariates, DesignSpec, FollowUp, Gender, ModelParams, PersonRecord, PosteriorDraws, StandardizationTable,
    Stratum, StudyYear, SurvivalCoefficients,
};
pub use error::{Error, Result};
pub mod likelihood;
pub mod mcmc;
pub mod synth;
pub mod impute;
pub mod prevalence;

#[cfg(test)]
mod oracle;
