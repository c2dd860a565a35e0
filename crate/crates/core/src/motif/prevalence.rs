use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MotifHit, MotifId};
use crate::trace::{Trace, TraceCorpus};

#[derive(Debug, Error)]
pub enum PrevalenceError {
    #[error("trace `{0}` has motif results but is not in the corpus")]
    UnknownTrace(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Model,
    Environment,
    Scope,
    Scaffold,
    /// Environment mapped through a caller-supplied domain-group table.
    DomainGroup,
}

impl GroupKey {
    pub fn value(self, trace: &Trace, domain_groups: &BTreeMap<String, String>) -> String {
        match self {
            GroupKey::Model => trace.model.clone(),
            GroupKey::Environment => trace.environment.clone(),
            GroupKey::Scope => trace.scope.to_string(),
            GroupKey::Scaffold => trace.scaffold.clone(),
            GroupKey::DomainGroup => domain_groups
                .get(&trace.environment)
                .cloned()
                .unwrap_or_else(|| "unassigned".into()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Model => "model",
            GroupKey::Environment => "environment",
            GroupKey::Scope => "scope",
            GroupKey::Scaffold => "scaffold",
            GroupKey::DomainGroup => "domain_group",
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            GroupKey::Model,
            GroupKey::Environment,
            GroupKey::Scope,
            GroupKey::Scaffold,
            GroupKey::DomainGroup,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown group key `{s}`"))
    }
}

/// How traces within a group are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every trace counts once.
    Pooled,
    /// Fractions are computed per environment, then averaged with equal
    /// weight per environment.
    EqualEnvironment,
}

impl Weighting {
    /// Per-model tables average over environments; everything else pools.
    pub fn default_for(group_by: &[GroupKey]) -> Self {
        if group_by == [GroupKey::Model] {
            Weighting::EqualEnvironment
        } else {
            Weighting::Pooled
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub group: Vec<String>,
    pub trace_count: usize,
    pub fractions: BTreeMap<MotifId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub group_by: Vec<GroupKey>,
    pub weighting: Weighting,
    pub rows: Vec<PrevalenceRow>,
}

impl PrevalenceReport {
    pub fn fraction(&self, group: &[&str], motif: MotifId) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.group.iter().map(String::as_str).eq(group.iter().copied()))
            .and_then(|r| r.fractions.get(&motif).copied())
    }

    fn group_label(row: &PrevalenceRow) -> String {
        if row.group.is_empty() {
            "all".into()
        } else {
            row.group.join("/")
        }
    }

    /// Motif-by-group table: one row per motif, one column per group.
    pub fn to_wide_csv(&self) -> Result<String, PrevalenceError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["motif".to_string(), "family".into(), "polarity".into()];
        header.extend(self.rows.iter().map(Self::group_label));
        w.write_record(&header)?;
        for motif in MotifId::ALL {
            let mut record = vec![
                motif.as_str().to_string(),
                enum_str(&motif.family()),
                enum_str(&motif.polarity()),
            ];
            record.extend(
                self.rows
                    .iter()
                    .map(|r| format!("{:.4}", r.fractions.get(&motif).copied().unwrap_or(0.0))),
            );
            w.write_record(&record)?;
        }
        finish(w)
    }

    /// Long format: group columns, then motif, fraction and trace count.
    pub fn to_long_csv(&self) -> Result<String, PrevalenceError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.group_by.iter().map(|k| k.to_string()).collect();
        header.extend(["motif".into(), "fraction".into(), "n".into()]);
        w.write_record(&header)?;
        for row in &self.rows {
            for (motif, frac) in &row.fractions {
                let mut record = row.group.clone();
                record.extend([
                    motif.to_string(),
                    format!("{frac:.6}"),
                    row.trace_count.to_string(),
                ]);
                w.write_record(&record)?;
            }
        }
        finish(w)
    }
}

fn enum_str<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, PrevalenceError> {
    let bytes = w
        .into_inner()
        .map_err(|e| PrevalenceError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn prevalence(
    results: &BTreeMap<String, BTreeSet<MotifHit>>,
    corpus: &TraceCorpus,
    group_by: &[GroupKey],
) -> Result<PrevalenceReport, PrevalenceError> {
    prevalence_with(
        results,
        corpus,
        group_by,
        Weighting::default_for(group_by),
        &BTreeMap::new(),
    )
}

/// Fraction of traces per group with at least one hit of each motif.
/// Only traces present in `results` are counted.
pub fn prevalence_with(
    results: &BTreeMap<String, BTreeSet<MotifHit>>,
    corpus: &TraceCorpus,
    group_by: &[GroupKey],
    weighting: Weighting,
    domain_groups: &BTreeMap<String, String>,
) -> Result<PrevalenceReport, PrevalenceError> {
    // group -> environment -> per-trace presence sets
    let mut grouped: BTreeMap<Vec<String>, BTreeMap<String, Vec<BTreeSet<MotifId>>>> =
        BTreeMap::new();
    for (trace_id, hits) in results {
        let trace = corpus
            .get(trace_id)
            .ok_or_else(|| PrevalenceError::UnknownTrace(trace_id.clone()))?;
        let key: Vec<String> = group_by
            .iter()
            .map(|k| k.value(trace, domain_groups))
            .collect();
        let env = match weighting {
            Weighting::Pooled => String::new(),
            Weighting::EqualEnvironment => trace.environment.clone(),
        };
        grouped
            .entry(key)
            .or_default()
            .entry(env)
            .or_default()
            .push(hits.iter().map(|h| h.motif).collect());
    }

    let rows = grouped
        .into_iter()
        .map(|(group, by_env)| {
            let trace_count = by_env.values().map(Vec::len).sum();
            let fractions = MotifId::ALL
                .into_iter()
                .map(|motif| {
                    let per_env: Vec<f64> = by_env
                        .values()
                        .map(|traces| {
                            let with = traces.iter().filter(|s| s.contains(&motif)).count();
                            with as f64 / traces.len() as f64
                        })
                        .collect();
                    (motif, per_env.iter().sum::<f64>() / per_env.len() as f64)
                })
                .collect();
            PrevalenceRow {
                group,
                trace_count,
                fractions,
            }
        })
        .collect();

    Ok(PrevalenceReport {
        group_by: group_by.to_vec(),
        weighting,
        rows,
    })
}
