//! Two-parameter logistic item response model fitted by MAP.
//!
//! Each respondent is a (model, environment) pair with ability θ drawn from
//! N(μ_model + ν_environment, σ_θ). Items have discrimination `a = exp(log_a)`
//! with `log_a ~ N(0, 0.5)` and difficulty `b ~ N(0, 2)`. Knowledge and
//! reasoning items are fitted separately.

mod data;
mod fit;
mod model;

use thiserror::Error;

pub use data::{Item, ItemSet, ResponseMatrix};
pub use fit::{
    fit, fit_map, standardize, AbilityParams, FitConfig, IrtFit, ItemParams, RespondentAbility,
    StepRule,
};
pub use model::{irt_prob, log_likelihood, neg_log_posterior, neg_log_posterior_grad, IrtParams, Priors};

#[derive(Debug, Error)]
pub enum IrtError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid response data: {0}")]
    Data(String),
    #[error("objective became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
