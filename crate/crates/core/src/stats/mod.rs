//! Evaluation statistics: Pass@k and Pass^k estimators, inter-annotator
//! agreement, and pooled token log-probabilities.

mod agreement;
mod logprob;
mod passk;

use thiserror::Error;

pub use agreement::{cohen_kappa, pabak, pabak_from_agreement, percent_agreement, LabelPairSeries};
pub use logprob::{mean_logprob, mean_logprob_with, retained, TokenPool};
pub use passk::{
    binomial, pass_at_k, pass_hat_k, pass_hat_k_with, PassHatEstimator, TrialTally,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
}
