//! Pass@k and Pass^k from trial outcomes, rater agreement, and pooled
//! token log-probabilities.
//!
//! ```text
//! cargo run --example statistics
//! ```

use epitrace::motif::GroupKey;
use epitrace::stats::{
    cohen_kappa, mean_logprob, pabak, pass_at_k, pass_hat_k, pass_hat_k_with, percent_agreement,
    LabelPairSeries, PassHatEstimator, TrialTally,
};
use epitrace::trace::{Message, Role, TokenLogprob, Trace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 10 trials, 4 solved
    let outcomes = [true, false, false, true, false, true, false, false, true, false];
    let tally = TrialTally::from_outcomes(&outcomes)?;
    for k in [1, 2, 5, 10] {
        println!(
            "k={k:<2} pass@k={:.4} pass^k={:.4} (plug-in {:.4})",
            pass_at_k(tally, k)?,
            pass_hat_k(tally, k)?,
            pass_hat_k_with(tally, k, PassHatEstimator::PlugIn)?
        );
    }

    // two raters on one binary marker; both rarely say yes, so kappa is
    // low even though they mostly agree
    let a = [false, false, false, true, false, false, false, false, false, false];
    let b = [false, false, false, false, false, false, false, true, false, false];
    let pairs = LabelPairSeries::from_raters(&a, &b)?;
    println!(
        "\nagreement {:.3}, kappa {:?}, PABAK {:.3}",
        percent_agreement(&pairs)?,
        cohen_kappa(&pairs)?,
        pabak(&pairs)?
    );

    let tok = |logprob: f64, is_special: bool| TokenLogprob { token: "t".into(), logprob, is_special };
    let mut answer = Message::new(1, Role::Assistant, "The compound is 4-phenylbutan-2-one.");
    // the trailing special token at exactly 0 is not counted
    answer.token_logprobs = Some(vec![tok(-0.12, false), tok(-1.9, false), tok(-0.4, false), tok(0.0, true)]);
    let trace = Trace {
        trace_id: "t1".into(),
        model: "m".into(),
        environment: "spectra".into(),
        scope: 1,
        scaffold: "tool_calling".into(),
        task_id: "spectra-017".into(),
        trial: 0,
        outcome_score: 1.0,
        messages: vec![Message::new(0, Role::User, "Identify the compound."), answer],
    };
    for (group, mean) in mean_logprob([&trace], GroupKey::Environment) {
        println!("\nmean log-probability for {group}: {mean:?}");
    }
    Ok(())
}
