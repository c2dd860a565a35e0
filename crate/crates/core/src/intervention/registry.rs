use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{eligible_pool, sample_trace, InterventionError, InterventionSpec, PoolKind};
use crate::trace::{Trace, TraceCorpus};

/// Agent identity used for pooling: `model/scaffold`.
pub fn agent_key(trace: &Trace) -> String {
    format!("{}/{}", trace.model, trace.scaffold)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegistryKey {
    pub environment: String,
    pub agent: String,
    pub task: String,
}

impl RegistryKey {
    pub fn of(trace: &Trace) -> Self {
        Self {
            environment: trace.environment.clone(),
            agent: agent_key(trace),
            task: trace.task_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistryOptions {
    /// A trial counts as a success when its outcome score reaches this value.
    pub success_threshold: f64,
    pub min_success_rate: f64,
    pub max_success_rate: f64,
}

impl Default for RegistryOptions {
    fn default() -> Self {
        Self {
            success_threshold: 1.0,
            min_success_rate: 0.2,
            max_success_rate: 0.8,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PoolEntry {
    pub trials: usize,
    pub successes: usize,
    pub success_traces: Vec<Arc<Trace>>,
    pub failed_traces: Vec<Arc<Trace>>,
}

impl PoolEntry {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn pool(&self, kind: PoolKind) -> &[Arc<Trace>] {
        match kind {
            PoolKind::Success => &self.success_traces,
            PoolKind::Failed => &self.failed_traces,
        }
    }
}

/// Success and failure pools per (environment, agent, task), restricted to
/// tasks whose baseline success rate lies in the configured band.
#[derive(Debug, Clone, Default)]
pub struct TraceRegistry {
    pub options: RegistryOptions,
    pub entries: BTreeMap<RegistryKey, PoolEntry>,
    /// Baseline (trials, successes) of keys that fell outside the band.
    pub excluded: BTreeMap<RegistryKey, (usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersistedEntry {
    #[serde(flatten)]
    key: RegistryKey,
    trials: usize,
    successes: usize,
    success_rate: f64,
    success_trace_ids: Vec<String>,
    failed_trace_ids: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersistedExcluded {
    #[serde(flatten)]
    key: RegistryKey,
    trials: usize,
    successes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersistedRegistry {
    options: RegistryOptions,
    entries: Vec<PersistedEntry>,
    excluded: Vec<PersistedExcluded>,
}

impl TraceRegistry {
    pub fn build(corpus: &TraceCorpus, options: RegistryOptions) -> Self {
        let mut all: BTreeMap<RegistryKey, PoolEntry> = BTreeMap::new();
        for trace in corpus.iter() {
            let entry = all.entry(RegistryKey::of(trace)).or_default();
            entry.trials += 1;
            if trace.outcome_score >= options.success_threshold {
                entry.successes += 1;
                entry.success_traces.push(trace.clone());
            } else {
                entry.failed_traces.push(trace.clone());
            }
        }
        let mut registry = Self {
            options,
            ..Self::default()
        };
        for (key, entry) in all {
            let rate = entry.success_rate();
            if (options.min_success_rate..=options.max_success_rate).contains(&rate) {
                registry.entries.insert(key, entry);
            } else {
                registry.excluded.insert(key, (entry.trials, entry.successes));
            }
        }
        registry
    }

    pub fn get(&self, key: &RegistryKey) -> Option<&PoolEntry> {
        self.entries.get(key)
    }

    /// Draws the source trace for one intervention trial.
    pub fn draw(
        &self,
        key: &RegistryKey,
        spec: &InterventionSpec,
    ) -> Result<Arc<Trace>, InterventionError> {
        let entry = self.get(key).ok_or_else(|| InterventionError::UnknownKey {
            environment: key.environment.clone(),
            agent: key.agent.clone(),
            task: key.task.clone(),
        })?;
        let pool = eligible_pool(entry.pool(spec.kind), spec.k);
        sample_trace(&pool, spec.seed).ok_or_else(|| InterventionError::EmptyPool {
            environment: key.environment.clone(),
            agent: key.agent.clone(),
            task: key.task.clone(),
            k: spec.k,
        })
    }

    /// Pool membership and baseline rates as JSON. Traces are referenced by id.
    pub fn to_json(&self) -> String {
        let ids = |v: &[Arc<Trace>]| v.iter().map(|t| t.trace_id.clone()).collect();
        let persisted = PersistedRegistry {
            options: self.options,
            entries: self
                .entries
                .iter()
                .map(|(key, e)| PersistedEntry {
                    key: key.clone(),
                    trials: e.trials,
                    successes: e.successes,
                    success_rate: e.success_rate(),
                    success_trace_ids: ids(&e.success_traces),
                    failed_trace_ids: ids(&e.failed_traces),
                })
                .collect(),
            excluded: self
                .excluded
                .iter()
                .map(|(key, &(trials, successes))| PersistedExcluded {
                    key: key.clone(),
                    trials,
                    successes,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&persisted).expect("registry serializes")
    }

    /// Restores a registry written by [`to_json`](Self::to_json), resolving
    /// trace ids against `corpus`.
    pub fn from_json(json: &str, corpus: &TraceCorpus) -> Result<Self, InterventionError> {
        let p: PersistedRegistry =
            serde_json::from_str(json).map_err(|e| InterventionError::Registry(e.to_string()))?;
        let resolve = |ids: &[String], key: &RegistryKey| -> Result<Vec<Arc<Trace>>, InterventionError> {
            ids.iter()
                .map(|id| {
                    let t = corpus.get(id).ok_or_else(|| {
                        InterventionError::Registry(format!("trace `{id}` not in corpus"))
                    })?;
                    if &RegistryKey::of(t) != key {
                        return Err(InterventionError::Registry(format!(
                            "trace `{id}` does not belong to {key:?}"
                        )));
                    }
                    Ok(t.clone())
                })
                .collect()
        };
        let mut registry = Self {
            options: p.options,
            ..Self::default()
        };
        for e in p.entries {
            let entry = PoolEntry {
                trials: e.trials,
                successes: e.successes,
                success_traces: resolve(&e.success_trace_ids, &e.key)?,
                failed_traces: resolve(&e.failed_trace_ids, &e.key)?,
            };
            registry.entries.insert(e.key, entry);
        }
        for x in p.excluded {
            registry.excluded.insert(x.key, (x.trials, x.successes));
        }
        Ok(registry)
    }
}
