use serde::{Deserialize, Serialize};

use super::StatsError;

/// Successes `c` out of `n` independent trials of one task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialTally {
    pub n: u64,
    pub c: u64,
}

impl TrialTally {
    pub fn new(n: u64, c: u64) -> Result<Self, StatsError> {
        if n == 0 {
            return Err(StatsError::Domain("trial count must be at least 1".into()));
        }
        if c > n {
            return Err(StatsError::Domain(format!(
                "success count {c} exceeds trial count {n}"
            )));
        }
        Ok(Self { n, c })
    }

    /// Tallies a list of per-trial outcomes.
    pub fn from_outcomes(outcomes: &[bool]) -> Result<Self, StatsError> {
        let c = outcomes.iter().filter(|&&s| s).count() as u64;
        Self::new(outcomes.len() as u64, c)
    }

    fn check_k(&self, k: u64) -> Result<(), StatsError> {
        if k == 0 || k > self.n {
            return Err(StatsError::Domain(format!(
                "k = {k} outside 1..={}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Exact C(n, k) for n ≤ 64, where every intermediate fits in u128.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    if n > 64 {
        return None;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    Some(acc)
}

/// C(m, k) / C(n, k) for m ≤ n.
fn binomial_ratio(m: u64, n: u64, k: u64) -> f64 {
    if k > m {
        return 0.0;
    }
    if let (Some(num), Some(den)) = (binomial(m, k), binomial(n, k)) {
        return num as f64 / den as f64;
    }
    (0..k).map(|i| (m - i) as f64 / (n - i) as f64).product()
}

/// Probability that a uniformly drawn k-subset of the trials contains at
/// least one success: 1 − C(n−c, k)/C(n, k).
pub fn pass_at_k(tally: TrialTally, k: u64) -> Result<f64, StatsError> {
    tally.check_k(k)?;
    Ok(1.0 - binomial_ratio(tally.n - tally.c, tally.n, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassHatEstimator {
    /// C(c, k)/C(n, k): probability a uniform k-subset is all successes.
    #[default]
    Hypergeometric,
    /// (c/n)^k.
    PlugIn,
}

/// Probability that every trial of a uniformly drawn k-subset succeeds.
pub fn pass_hat_k(tally: TrialTally, k: u64) -> Result<f64, StatsError> {
    pass_hat_k_with(tally, k, PassHatEstimator::Hypergeometric)
}

pub fn pass_hat_k_with(
    tally: TrialTally,
    k: u64,
    estimator: PassHatEstimator,
) -> Result<f64, StatsError> {
    tally.check_k(k)?;
    Ok(match estimator {
        PassHatEstimator::Hypergeometric => binomial_ratio(tally.c, tally.n, k),
        PassHatEstimator::PlugIn => (tally.c as f64 / tally.n as f64).powi(k as i32),
    })
}
