//! Epistemic graphs: typed reasoning operations linked by whitelisted
//! dependency relations, each grounded in verbatim quotes from the trace.
//!
//! Annotator output arrives as a [`GraphDraft`] whose type and relation
//! fields are free strings. [`validate_graph`] turns a draft into a typed
//! [`EpistemicGraph`] and records every repair in a [`WarningLedger`].

mod merge;
mod validate;
mod whitelist;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use merge::{merge_window_annotations, normalize_text};
pub use validate::{
    validate_graph, validate_graph_with, ValidateOptions, WarningCategory, WarningEntry,
    WarningLedger,
};
pub use whitelist::{allowed, ALLOWED_TRIPLES};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph belongs to trace `{graph}` but was checked against trace `{trace}`")]
    TraceMismatch { graph: String, trace: String },
    #[error("cannot merge fragments from different traces: `{0}` and `{1}`")]
    MixedTraces(String, String),
    #[error("graph for trace `{trace_id}` rejected: {reason}")]
    Rejected { trace_id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    /// Hypothesis
    H,
    /// Test
    T,
    /// Evidence
    E,
    /// Judgment
    J,
    /// Commitment (may be a pseudo-node)
    C,
    /// Final answer
    F,
    /// Neutral
    N,
}

impl NodeType {
    pub const ALL: [NodeType; 7] = [
        NodeType::H,
        NodeType::T,
        NodeType::E,
        NodeType::J,
        NodeType::C,
        NodeType::F,
        NodeType::N,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::H => "H",
            NodeType::T => "T",
            NodeType::E => "E",
            NodeType::J => "J",
            NodeType::C => "C",
            NodeType::F => "F",
            NodeType::N => "N",
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown node type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Tests,
    Observes,
    Informs,
    Contradicts,
    CompetesWith,
    UpdatesTo,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Tests,
        Relation::Observes,
        Relation::Informs,
        Relation::Contradicts,
        Relation::CompetesWith,
        Relation::UpdatesTo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Tests => "tests",
            Relation::Observes => "observes",
            Relation::Informs => "informs",
            Relation::Contradicts => "contradicts",
            Relation::CompetesWith => "competes_with",
            Relation::UpdatesTo => "updates_to",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown relation `{s}`"))
    }
}

/// A verbatim quote and the index of the message it was taken from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Support {
    pub msg_idx: usize,
    pub quote: String,
}

impl Support {
    pub fn new(msg_idx: usize, quote: impl Into<String>) -> Self {
        Self {
            msg_idx,
            quote: quote.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiNode {
    pub node_id: String,
    #[serde(rename = "type")]
    pub node_type: NodeType,
    pub time: usize,
    pub text: String,
    pub support: Vec<Support>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiEdge {
    pub src: String,
    pub dst: String,
    pub relation: Relation,
    pub time: usize,
    pub support: Vec<Support>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpistemicGraph {
    pub trace_id: String,
    #[serde(default)]
    pub nodes: Vec<EpiNode>,
    #[serde(default)]
    pub edges: Vec<EpiEdge>,
}

impl EpistemicGraph {
    pub fn empty(trace_id: impl Into<String>) -> Self {
        Self {
            trace_id: trace_id.into(),
            ..Default::default()
        }
    }

    pub fn node(&self, node_id: &str) -> Option<&EpiNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    /// Back to the untyped document form, e.g. to re-run validation.
    pub fn to_draft(&self) -> GraphDraft {
        GraphDraft {
            trace_id: self.trace_id.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| RawNode {
                    node_id: n.node_id.clone(),
                    node_type: n.node_type.as_str().to_string(),
                    time: Some(n.time),
                    text: n.text.clone(),
                    support: n.support.clone(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| RawEdge {
                    src: e.src.clone(),
                    dst: e.dst.clone(),
                    relation: e.relation.as_str().to_string(),
                    time: Some(e.time),
                    support: e.support.clone(),
                })
                .collect(),
        }
    }
}

/// A node as emitted by an annotator: the type is not yet checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNode {
    pub node_id: String,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default)]
    pub time: Option<usize>,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub support: Vec<Support>,
}

impl RawNode {
    /// Earliest supporting message, falling back to the declared time.
    pub fn earliest(&self) -> Option<usize> {
        self.support.iter().map(|s| s.msg_idx).min().or(self.time)
    }
}

/// An edge as emitted by an annotator: the relation is not yet checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEdge {
    pub src: String,
    pub dst: String,
    pub relation: String,
    #[serde(default)]
    pub time: Option<usize>,
    #[serde(default)]
    pub support: Vec<Support>,
}

impl RawEdge {
    pub fn earliest(&self) -> Option<usize> {
        self.support.iter().map(|s| s.msg_idx).min().or(self.time)
    }
}

/// Unvalidated graph document, as parsed from annotator output or a window
/// fragment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphDraft {
    #[serde(default)]
    pub trace_id: String,
    #[serde(default)]
    pub nodes: Vec<RawNode>,
    #[serde(default)]
    pub edges: Vec<RawEdge>,
}

impl GraphDraft {
    pub fn new(trace_id: impl Into<String>) -> Self {
        Self {
            trace_id: trace_id.into(),
            ..Default::default()
        }
    }
}
