//! Log-posterior of the joint smoking and survival model.

mod layout;
mod model;
mod weibull;

pub use layout::{draws_from_params, params_from_named, ModelTarget, ParamLayout};
pub use model::{
    design_row, linear_predictor_log_b, log_posterior, log_prior, normal_prior_logpdf, prior_terms, record_loglik,
    smoking_logit, smoking_probability, LikelihoodWorkspace, SurvivalEval, BIRTH_YEAR_REFERENCE, PRIOR_VARIANCE,
};
pub use weibull::{pow_time, sample_truncated, weibull_censored_loglik, weibull_event_loglik, weibull_log_hazard};
