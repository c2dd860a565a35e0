use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::motif::GroupKey;
use crate::trace::{TokenLogprob, Trace};

/// Retained top-1 token log-probabilities for one group.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TokenPool {
    pub values: Vec<f64>,
    /// Retained token count contributed by each environment.
    pub per_environment: BTreeMap<String, usize>,
}

impl TokenPool {
    pub fn add_trace(&mut self, trace: &Trace) {
        let before = self.values.len();
        for msg in trace.messages.iter().filter(|m| m.is_assistant()) {
            if let Some(tokens) = &msg.token_logprobs {
                self.values
                    .extend(tokens.iter().filter(|t| retained(t)).map(|t| t.logprob));
            }
        }
        *self
            .per_environment
            .entry(trace.environment.clone())
            .or_default() += self.values.len() - before;
    }

    /// Arithmetic mean, or `None` when nothing was retained. Values are
    /// summed in sorted order so the result does not depend on the order in
    /// which traces were added.
    pub fn mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        Some(sorted.iter().sum::<f64>() / sorted.len() as f64)
    }
}

/// Special control tokens reported with log-probability exactly zero are
/// dropped, as are non-finite values.
pub fn retained(token: &TokenLogprob) -> bool {
    token.logprob.is_finite() && !(token.is_special && token.logprob == 0.0)
}

/// Pools tokens per group and returns each group's pool. Groups whose traces
/// contributed no retained token are present with an empty pool.
pub fn mean_logprob_with<'a>(
    traces: impl IntoIterator<Item = &'a Trace>,
    scope: GroupKey,
    domain_groups: &BTreeMap<String, String>,
) -> BTreeMap<String, TokenPool> {
    let mut pools: BTreeMap<String, TokenPool> = BTreeMap::new();
    for trace in traces {
        pools
            .entry(scope.value(trace, domain_groups))
            .or_default()
            .add_trace(trace);
    }
    pools
}

/// Mean retained log-probability per group; `None` marks a group with no
/// retained tokens.
pub fn mean_logprob<'a>(
    traces: impl IntoIterator<Item = &'a Trace>,
    scope: GroupKey,
) -> BTreeMap<String, Option<f64>> {
    mean_logprob_with(traces, scope, &BTreeMap::new())
        .into_iter()
        .map(|(k, pool)| (k, pool.mean()))
        .collect()
}
