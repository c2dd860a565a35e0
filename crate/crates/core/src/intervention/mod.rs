//! Trace intervention: seed a fresh trial with a prefix of a prior
//! successful or failed trace.
//!
//! A source trace is drawn from a registry pool, its assistant turns are
//! sliced at step `k`, and the kept turns are injected after the task
//! prompt, each followed by the observations its tool calls produce.

mod executor;
mod registry;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{assistant_turns, Message, Role, Trace, TraceError};

pub use executor::{CallSite, HttpExecutor, ReplayExecutor, ToolExecutor};
pub use registry::{agent_key, PoolEntry, RegistryKey, RegistryOptions, TraceRegistry};

/// Sampling temperature for continuation trials. Recorded with each seed
/// history; this module does not run agents.
pub const CONTINUATION_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Error)]
pub enum InterventionError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no eligible trace for environment `{environment}`, agent `{agent}`, task `{task}` at k = {k}")]
    EmptyPool {
        environment: String,
        agent: String,
        task: String,
        k: i64,
    },
    #[error("no registry entry for environment `{environment}`, agent `{agent}`, task `{task}`")]
    UnknownKey {
        environment: String,
        agent: String,
        task: String,
    },
    #[error("executing `{tool}` with {arguments} failed: {message}")]
    Execution {
        tool: String,
        arguments: String,
        message: String,
    },
    #[error("source trace has no recorded observation for call {call} of turn {turn}")]
    MissingObservation { turn: usize, call: usize },
    #[error("source trace `{0}` has no task prompt")]
    NoTaskPrompt(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("registry file: {0}")]
    Registry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Success,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub kind: PoolKind,
    pub k: i64,
    pub seed: u64,
}

impl InterventionSpec {
    /// Steps probed in the reference protocol: two early, two near-terminal.
    pub const STANDARD_STEPS: [i64; 4] = [1, 2, -2, -1];

    pub fn new(kind: PoolKind, k: i64, seed: u64) -> Result<Self, InterventionError> {
        if k == 0 {
            return Err(InterventionError::Domain("k must be non-zero".into()));
        }
        Ok(Self { kind, k, seed })
    }
}

fn eligible(turns: usize, k: i64) -> bool {
    (k > 0 && turns as u64 >= k as u64) || (k < 0 && turns as u64 > k.unsigned_abs())
}

/// First `k` turns for positive `k`; all but the last `|k|` for negative `k`.
pub fn slice<T>(turns: &[T], k: i64) -> Result<&[T], InterventionError> {
    if !eligible(turns.len(), k) {
        return Err(InterventionError::Domain(format!(
            "cannot slice {} turns at k = {k}",
            turns.len()
        )));
    }
    let keep = if k > 0 {
        k as usize
    } else {
        turns.len() - k.unsigned_abs() as usize
    };
    Ok(&turns[..keep])
}

/// Traces with enough assistant turns to be sliced at `k`.
pub fn eligible_pool<T: AsRef<Trace> + Clone>(pool: &[T], k: i64) -> Vec<T> {
    pool.iter()
        .filter(|t| eligible(assistant_turns(t.as_ref()).len(), k))
        .cloned()
        .collect()
}

/// Uniform draw from `pool`, deterministic under `seed`. `None` for an empty
/// pool.
pub fn sample_trace<T: Clone>(pool: &[T], seed: u64) -> Option<T> {
    if pool.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Some(pool[rng.random_range(0..pool.len())].clone())
}

/// Initial message history for a continuation trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedHistory {
    pub source_trace_id: String,
    pub spec: InterventionSpec,
    pub temperature: f64,
    pub messages: Vec<Message>,
}

impl SeedHistory {
    /// Checks that the history opens with the task prompt and that every
    /// injected tool call is followed by exactly one observation.
    pub fn check_interleaving(&self) -> bool {
        let Some(first) = self.messages.first() else {
            return false;
        };
        if !first.is_task_description {
            return false;
        }
        let mut pending = 0usize;
        for m in &self.messages[1..] {
            match m.role {
                Role::Assistant => {
                    if pending != 0 {
                        return false;
                    }
                    pending = m.tool_calls().len();
                }
                Role::Observation => {
                    if pending == 0 {
                        return false;
                    }
                    pending -= 1;
                }
                _ => return false,
            }
        }
        pending == 0
    }

    /// The history in trace-file form. Metadata is copied from the source
    /// trace; the outcome is unknown until the continuation runs and is
    /// recorded as 0.
    pub fn to_trace(&self, source: &Trace) -> Trace {
        let kind = match self.spec.kind {
            PoolKind::Success => "success",
            PoolKind::Failed => "failed",
        };
        Trace {
            trace_id: format!(
                "{}-seed-{kind}-k{}-s{}",
                source.trace_id, self.spec.k, self.spec.seed
            ),
            model: source.model.clone(),
            environment: source.environment.clone(),
            scope: source.scope,
            scaffold: source.scaffold.clone(),
            task_id: source.task_id.clone(),
            trial: source.trial,
            outcome_score: 0.0,
            messages: self.messages.clone(),
        }
    }
}

/// Assembles `[u₀, a₁, o₁…, a₂, o₂…, …]` from the sliced assistant turns of
/// `trace`, executing each tool call through `executor`.
pub fn build_seed_history(
    trace: &Trace,
    spec: &InterventionSpec,
    executor: &dyn ToolExecutor,
) -> Result<SeedHistory, InterventionError> {
    let prompt = trace
        .task_prompt()
        .ok_or_else(|| InterventionError::NoTaskPrompt(trace.trace_id.clone()))?;
    let turns = assistant_turns(trace);
    let kept = slice(&turns, spec.k)?;

    let mut messages = Vec::new();
    let mut push = |mut m: Message| {
        m.index = messages.len();
        messages.push(m);
    };
    let mut u0 = prompt.clone();
    u0.role = Role::User;
    push(u0);
    for (turn, msg) in kept.iter().enumerate() {
        let mut injected = (*msg).clone();
        injected.token_logprobs = None;
        push(injected);
        for (call_idx, call) in msg.tool_calls().iter().enumerate() {
            let observation = executor.execute(
                call,
                CallSite {
                    turn,
                    call: call_idx,
                },
            )?;
            push(Message::new(0, Role::Observation, observation));
        }
    }
    Ok(SeedHistory {
        source_trace_id: trace.trace_id.clone(),
        spec: *spec,
        temperature: CONTINUATION_TEMPERATURE,
        messages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ToolCall;

    pub(crate) fn call(name: &str) -> ToolCall {
        ToolCall {
            name: name.into(),
            arguments: serde_json::Map::new(),
        }
    }

    /// Trace with `turns` assistant turns; turn `i` calls `tool{i}` once and
    /// is followed by observation `obs{i}`.
    pub(crate) fn trace_with_turns(id: &str, turns: usize) -> Trace {
        let mut messages = vec![
            Message::new(0, Role::System, "sys"),
            Message::new(1, Role::User, "solve the task"),
        ];
        messages[1].is_task_description = true;
        for i in 0..turns {
            let n = messages.len();
            messages.push(
                Message::new(n, Role::Assistant, format!("step {i}"))
                    .with_tool_calls(vec![call(&format!("tool{i}"))]),
            );
            messages.push(Message::new(n + 1, Role::Observation, format!("obs{i}")));
        }
        Trace {
            trace_id: id.into(),
            model: "m".into(),
            environment: "e".into(),
            scope: 1,
            scaffold: "react".into(),
            task_id: "t".into(),
            trial: 0,
            outcome_score: 1.0,
            messages,
        }
    }

    #[test]
    fn slice_examples() {
        let a = [1, 2, 3, 4, 5];
        assert_eq!(slice(&a, 2).unwrap(), &[1, 2]);
        assert_eq!(slice(&a, -1).unwrap(), &[1, 2, 3, 4]);
        assert!(slice(&[1, 2, 3], -3).is_err());
        assert!(slice(&[1, 2, 3], 4).is_err());
        assert!(slice(&[1, 2, 3], 0).is_err());
        assert_eq!(slice(&[1, 2, 3], 3).unwrap(), &[1, 2, 3]);
    }

    #[test]
    fn eligibility_examples() {
        let pool = vec![trace_with_turns("three", 3), trace_with_turns("one", 1)];
        let ids = |v: Vec<Trace>| v.into_iter().map(|t| t.trace_id).collect::<Vec<_>>();
        assert_eq!(ids(eligible_pool(&pool, 2)), vec!["three"]);
        assert_eq!(ids(eligible_pool(&pool, -2)), vec!["three"]);
        let fives = vec![trace_with_turns("a", 5), trace_with_turns("b", 5)];
        assert_eq!(eligible_pool(&fives, 1).len(), 2);
    }

    #[test]
    fn sampling_is_seeded_and_uniformish() {
        assert_eq!(sample_trace(&["only"], 9), Some("only"));
        assert_eq!(sample_trace::<&str>(&[], 9), None);
        let pool = ["a", "b"];
        assert_eq!(sample_trace(&pool, 42), sample_trace(&pool, 42));
        let draws: std::collections::BTreeSet<_> =
            (0..100).filter_map(|s| sample_trace(&pool, s)).collect();
        assert_eq!(draws.len(), 2);
    }

    #[test]
    fn replay_history_k1() {
        let t = trace_with_turns("t", 3);
        let spec = InterventionSpec::new(PoolKind::Success, 1, 0).unwrap();
        let h = build_seed_history(&t, &spec, &ReplayExecutor::from_trace(&t)).unwrap();
        let contents: Vec<&str> = h.messages.iter().map(|m| m.content.as_str()).collect();
        assert_eq!(contents, vec!["solve the task", "step 0", "obs0"]);
        assert!(h.check_interleaving());
        assert_eq!(h.temperature, 0.7);
    }

    #[test]
    fn replay_history_negative_k() {
        let t = trace_with_turns("t", 3);
        let spec = InterventionSpec::new(PoolKind::Failed, -1, 0).unwrap();
        let h = build_seed_history(&t, &spec, &ReplayExecutor::from_trace(&t)).unwrap();
        let contents: Vec<&str> = h.messages.iter().map(|m| m.content.as_str()).collect();
        assert_eq!(contents, vec!["solve the task", "step 0", "obs0", "step 1", "obs1"]);
        let as_trace = h.to_trace(&t);
        as_trace.check().unwrap();
    }

    #[test]
    fn turn_without_calls_has_no_observation() {
        let mut t = trace_with_turns("t", 1);
        let n = t.messages.len();
        t.messages.push(Message::new(n, Role::Assistant, "final answer"));
        let spec = InterventionSpec::new(PoolKind::Success, 2, 0).unwrap();
        let h = build_seed_history(&t, &spec, &ReplayExecutor::from_trace(&t)).unwrap();
        assert_eq!(h.messages.last().unwrap().content, "final answer");
        assert_eq!(h.messages.len(), 4);
        assert!(h.check_interleaving());
    }

    #[test]
    fn zero_k_rejected() {
        assert!(InterventionSpec::new(PoolKind::Success, 0, 1).is_err());
    }
}
