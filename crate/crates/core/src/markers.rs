//! Behavioral marker taxonomy and human marker annotations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{annotatable_messages, AnnotationMode, Trace, TraceCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerCategory {
    Positive,
    Neutral,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Marker {
    pub id: &'static str,
    pub category: MarkerCategory,
    pub definition: &'static str,
}

const fn m(id: &'static str, category: MarkerCategory, definition: &'static str) -> Marker {
    Marker {
        id,
        category,
        definition,
    }
}

use MarkerCategory::{Negative, Neutral, Positive};

pub const TAXONOMY: [Marker; 20] = [
    m("validation_attempt", Positive, "Checks a result or intermediate output explicitly."),
    m("backtrack_trigger", Positive, "Notices a dead end and switches to another approach."),
    m("planning_statement", Positive, "States a plan or subgoal before acting on it."),
    m("reasoning_statement", Positive, "Links hypotheses to evidence with explicit reasoning."),
    m("correct_submission", Positive, "Submits a final answer in the required format."),
    m("todo_list", Positive, "Works from a structured task list."),
    m("neutral", Neutral, "Nothing notable happens in the step."),
    m("missing_validation", Negative, "Skips a validation step the situation called for."),
    m("unnecessary_tool_use", Negative, "Calls a tool that was not needed."),
    m("non_sense", Negative, "Output is incoherent or contradicts itself."),
    m("loop_instance", Negative, "Repeats tool calls without using anything new."),
    m("hallucination", Negative, "Asserts fabricated or unsupported content."),
    m("wrong_planning", Negative, "Gives a plan that is factually or logically wrong."),
    m("wrong_reasoning", Negative, "Reasons towards an incorrect conclusion."),
    m("syntax_error", Negative, "Emits malformed output syntax."),
    m("early_final_answer", Negative, "Submits a final answer without enough justification."),
    m("give_up", Negative, "Declares that the task cannot be solved."),
    m("inefficient_tool_call", Negative, "Uses the right tool with a vague or weak query."),
    m("iteration_limit", Negative, "Runs into the iteration cap."),
    m("misunderstood_tool", Negative, "Uses a tool in a way that misreads what it does or expects."),
];

pub fn marker(id: &str) -> Option<&'static Marker> {
    TAXONOMY.iter().find(|m| m.id == id)
}

#[derive(Debug, Error, PartialEq)]
pub enum MarkerError {
    #[error("unknown marker `{marker}` on message {msg_idx}")]
    UnknownMarker { marker: String, msg_idx: usize },
    #[error("message {0} is not open to marker annotation")]
    NotAnnotatable(usize),
    #[error("annotation is for trace `{annotation}` but was checked against trace `{trace}`")]
    TraceMismatch { annotation: String, trace: String },
    #[error("submitted annotation leaves messages {0:?} without a marker")]
    Incomplete(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeMarkers {
    #[serde(default)]
    pub markers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One annotator's markers for one trace, keyed by message index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerAnnotation {
    pub trace_id: String,
    pub annotator_id: String,
    #[serde(default)]
    pub nodes: BTreeMap<usize, NodeMarkers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_note: Option<String>,
    #[serde(default)]
    pub submitted: bool,
}

impl MarkerAnnotation {
    pub fn new(trace_id: impl Into<String>, annotator_id: impl Into<String>) -> Self {
        Self {
            trace_id: trace_id.into(),
            annotator_id: annotator_id.into(),
            nodes: BTreeMap::new(),
            trace_note: None,
            submitted: false,
        }
    }

    pub fn mark(&mut self, msg_idx: usize, marker: &str) -> &mut Self {
        self.nodes
            .entry(msg_idx)
            .or_default()
            .markers
            .push(marker.to_string());
        self
    }

    fn check_trace(&self, trace: &Trace) -> Result<(), MarkerError> {
        if self.trace_id != trace.trace_id {
            return Err(MarkerError::TraceMismatch {
                annotation: self.trace_id.clone(),
                trace: trace.trace_id.clone(),
            });
        }
        Ok(())
    }

    /// Every marker is in the taxonomy and every keyed message is open to
    /// marker annotation. Submitted annotations must also be complete.
    pub fn validate(&self, trace: &Trace) -> Result<(), MarkerError> {
        self.check_trace(trace)?;
        let open: BTreeSet<usize> = annotatable_messages(trace, AnnotationMode::Marker)
            .iter()
            .map(|m| m.index)
            .collect();
        for (&idx, node) in &self.nodes {
            if !open.contains(&idx) {
                return Err(MarkerError::NotAnnotatable(idx));
            }
            if let Some(bad) = node.markers.iter().find(|id| marker(id).is_none()) {
                return Err(MarkerError::UnknownMarker {
                    marker: bad.clone(),
                    msg_idx: idx,
                });
            }
        }
        if self.submitted {
            let missing = self.unmarked(trace);
            if !missing.is_empty() {
                return Err(MarkerError::Incomplete(missing));
            }
        }
        Ok(())
    }

    fn unmarked(&self, trace: &Trace) -> Vec<usize> {
        annotatable_messages(trace, AnnotationMode::Marker)
            .iter()
            .map(|m| m.index)
            .filter(|i| self.nodes.get(i).is_none_or(|n| n.markers.is_empty()))
            .collect()
    }
}

/// True iff every marker-annotatable message carries at least one marker.
pub fn check_submission_completeness(
    annotation: &MarkerAnnotation,
    trace: &Trace,
) -> Result<bool, MarkerError> {
    annotation.check_trace(trace)?;
    Ok(annotation.unmarked(trace).is_empty())
}

/// Marker occurrence counts with one column per (model, scaffold).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MarkerCountTable {
    pub columns: Vec<(String, String)>,
    /// Marker id to counts aligned with `columns`, in taxonomy order.
    pub rows: Vec<(String, Vec<u64>)>,
}

impl MarkerCountTable {
    pub fn get(&self, marker: &str, model: &str, scaffold: &str) -> Option<u64> {
        let col = self
            .columns
            .iter()
            .position(|(m, s)| m == model && s == scaffold)?;
        self.rows
            .iter()
            .find(|(id, _)| id == marker)
            .map(|(_, counts)| counts[col])
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["marker".to_string(), "category".to_string()];
        header.extend(self.columns.iter().map(|(m, s)| format!("{m}/{s}")));
        w.write_record(&header).expect("in-memory write");
        for (id, counts) in &self.rows {
            let category = marker(id)
                .map(|m| format!("{:?}", m.category).to_lowercase())
                .unwrap_or_default();
            let mut rec = vec![id.clone(), category];
            rec.extend(counts.iter().map(u64::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Raw marker occurrences per (model, scaffold). Annotations whose trace is
/// not in `corpus` are counted under `("unknown", "unknown")`.
pub fn marker_counts<'a>(
    annotations: impl IntoIterator<Item = &'a MarkerAnnotation>,
    corpus: &TraceCorpus,
) -> MarkerCountTable {
    let mut counts: BTreeMap<(String, String), BTreeMap<&str, u64>> = BTreeMap::new();
    for a in annotations {
        let col = corpus
            .get(&a.trace_id)
            .map(|t| (t.model.clone(), t.scaffold.clone()))
            .unwrap_or_else(|| ("unknown".into(), "unknown".into()));
        let bucket = counts.entry(col).or_default();
        for node in a.nodes.values() {
            for id in &node.markers {
                if let Some(mk) = marker(id) {
                    *bucket.entry(mk.id).or_default() += 1;
                }
            }
        }
    }
    MarkerCountTable {
        columns: counts.keys().cloned().collect(),
        rows: TAXONOMY
            .iter()
            .map(|mk| {
                (
                    mk.id.to_string(),
                    counts
                        .values()
                        .map(|b| b.get(mk.id).copied().unwrap_or(0))
                        .collect(),
                )
            })
            .collect(),
    }
}
