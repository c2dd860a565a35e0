use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    allowed, EpiEdge, EpiNode, EpistemicGraph, GraphDraft, GraphError, NodeType, Relation,
    Support,
};
use crate::trace::{Message, Role, Trace};

/// Quality-control failure modes recorded during validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningCategory {
    NonVerbatimQuoteNode,
    NonVerbatimQuoteEdge,
    DisallowedCombination,
    ExtraNodeAtObservationRemoved,
    NodeTypeCorrectedEOnly,
    OtherStructural,
    SchemaViolation,
}

impl WarningCategory {
    pub const ALL: [WarningCategory; 7] = [
        WarningCategory::NonVerbatimQuoteNode,
        WarningCategory::NonVerbatimQuoteEdge,
        WarningCategory::DisallowedCombination,
        WarningCategory::ExtraNodeAtObservationRemoved,
        WarningCategory::NodeTypeCorrectedEOnly,
        WarningCategory::OtherStructural,
        WarningCategory::SchemaViolation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WarningCategory::NonVerbatimQuoteNode => "non_verbatim_quote_node",
            WarningCategory::NonVerbatimQuoteEdge => "non_verbatim_quote_edge",
            WarningCategory::DisallowedCombination => "disallowed_combination",
            WarningCategory::ExtraNodeAtObservationRemoved => "extra_node_at_observation_removed",
            WarningCategory::NodeTypeCorrectedEOnly => "node_type_corrected_e_only",
            WarningCategory::OtherStructural => "other_structural",
            WarningCategory::SchemaViolation => "schema_violation",
        }
    }

    /// Quote mismatches are flagged but never change the graph.
    pub fn is_quote_mismatch(self) -> bool {
        matches!(
            self,
            WarningCategory::NonVerbatimQuoteNode | WarningCategory::NonVerbatimQuoteEdge
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningEntry {
    pub category: WarningCategory,
    pub node_or_edge_id: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WarningLedger {
    pub entries: Vec<WarningEntry>,
}

impl WarningLedger {
    pub fn push(
        &mut self,
        category: WarningCategory,
        id: impl Into<String>,
        detail: impl Into<String>,
    ) {
        self.entries.push(WarningEntry {
            category,
            node_or_edge_id: id.into(),
            detail: detail.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn count(&self, category: WarningCategory) -> usize {
        self.entries.iter().filter(|e| e.category == category).count()
    }

    /// Per-category totals, every category present (zero when unseen).
    pub fn counts(&self) -> BTreeMap<WarningCategory, usize> {
        WarningCategory::ALL
            .into_iter()
            .map(|c| (c, self.count(c)))
            .collect()
    }

    pub fn categories(&self) -> Vec<WarningCategory> {
        self.entries.iter().map(|e| e.category).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Reject the whole graph if any repair other than a quote mismatch was
    /// needed.
    pub strict: bool,
    /// Reject the whole graph when schema violations exceed this count.
    pub schema_violation_limit: Option<usize>,
}

pub fn validate_graph(
    draft: &GraphDraft,
    trace: &Trace,
) -> Result<(EpistemicGraph, WarningLedger), GraphError> {
    validate_graph_with(draft, trace, ValidateOptions::default())
}

pub fn validate_graph_with(
    draft: &GraphDraft,
    trace: &Trace,
    opts: ValidateOptions,
) -> Result<(EpistemicGraph, WarningLedger), GraphError> {
    if draft.trace_id != trace.trace_id {
        return Err(GraphError::TraceMismatch {
            graph: draft.trace_id.clone(),
            trace: trace.trace_id.clone(),
        });
    }
    let mut ledger = WarningLedger::default();
    let nodes = check_nodes(draft, trace, &mut ledger);
    let nodes = enforce_observation_rule(nodes, trace, &mut ledger);
    let nodes = enforce_single_final_answer(nodes, &mut ledger);
    let edges = check_edges(draft, trace, &nodes, &mut ledger);

    let schema_violations = ledger.count(WarningCategory::SchemaViolation);
    if let Some(limit) = opts.schema_violation_limit {
        if schema_violations > limit {
            return Err(GraphError::Rejected {
                trace_id: trace.trace_id.clone(),
                reason: format!("{schema_violations} schema violations exceed the limit of {limit}"),
            });
        }
    }
    if opts.strict {
        if let Some(e) = ledger.entries.iter().find(|e| !e.category.is_quote_mismatch()) {
            return Err(GraphError::Rejected {
                trace_id: trace.trace_id.clone(),
                reason: format!(
                    "strict mode: {} on {}: {}",
                    e.category.as_str(),
                    e.node_or_edge_id,
                    e.detail
                ),
            });
        }
    }

    Ok((
        EpistemicGraph {
            trace_id: trace.trace_id.clone(),
            nodes,
            edges,
        },
        ledger,
    ))
}

fn normalize_newlines(s: &str) -> String {
    s.replace("\r\n", "\n").replace('\r', "\n")
}

fn quote_in_message(quote: &str, message: &Message) -> bool {
    let quote = normalize_newlines(quote);
    if quote.trim().is_empty() {
        return false;
    }
    normalize_newlines(&message.content).contains(&quote)
        || message
            .tool_calls()
            .iter()
            .any(|c| normalize_newlines(&c.render()).contains(&quote))
}

/// Describes why a support entry is not verbatim, or `None` if it is.
fn quote_problem(support: &Support, trace: &Trace) -> Option<String> {
    match trace.message(support.msg_idx) {
        None => Some(format!(
            "quote cites message {} which does not exist",
            support.msg_idx
        )),
        Some(m) if !quote_in_message(&support.quote, m) => Some(format!(
            "quote {:?} is not a verbatim substring of message {}",
            support.quote, support.msg_idx
        )),
        Some(_) => None,
    }
}

fn check_nodes(draft: &GraphDraft, trace: &Trace, ledger: &mut WarningLedger) -> Vec<EpiNode> {
    let mut nodes = Vec::with_capacity(draft.nodes.len());
    let mut seen = HashSet::new();
    for raw in &draft.nodes {
        let id = raw.node_id.as_str();
        let node_type = match raw.node_type.parse::<NodeType>() {
            Ok(t) => t,
            Err(msg) => {
                ledger.push(WarningCategory::SchemaViolation, id, msg);
                continue;
            }
        };
        if id.is_empty() {
            ledger.push(WarningCategory::SchemaViolation, id, "node has an empty node_id");
            continue;
        }
        let Some(time) = raw.support.iter().map(|s| s.msg_idx).min() else {
            ledger.push(WarningCategory::SchemaViolation, id, "node has no support quotes");
            continue;
        };
        if !seen.insert(id.to_string()) {
            ledger.push(
                WarningCategory::OtherStructural,
                id,
                "duplicate node_id; later occurrence removed",
            );
            continue;
        }
        if raw.time != Some(time) {
            ledger.push(
                WarningCategory::OtherStructural,
                id,
                format!(
                    "time corrected from {} to earliest support {time}",
                    raw.time.map_or("none".to_string(), |t| t.to_string())
                ),
            );
        }
        // commitment pseudo-nodes may cite an explanatory gloss
        if node_type != NodeType::C {
            for s in &raw.support {
                if let Some(problem) = quote_problem(s, trace) {
                    ledger.push(WarningCategory::NonVerbatimQuoteNode, id, problem);
                }
            }
        }
        nodes.push(EpiNode {
            node_id: raw.node_id.clone(),
            node_type,
            time,
            text: raw.text.clone(),
            support: raw.support.clone(),
        });
    }
    nodes
}

/// The observation message a node is anchored on, if all of its support
/// cites observation messages.
fn observation_anchor(node: &EpiNode, trace: &Trace) -> Option<usize> {
    let all_observation = node.support.iter().all(|s| {
        trace
            .message(s.msg_idx)
            .is_some_and(|m| m.role == Role::Observation)
    });
    all_observation.then_some(node.time)
}

/// Observation messages carry exactly one E node: the first E anchored there
/// is kept; failing that, the first node is retyped to E. Every other node
/// anchored solely on the observation is removed.
fn enforce_observation_rule(
    nodes: Vec<EpiNode>,
    trace: &Trace,
    ledger: &mut WarningLedger,
) -> Vec<EpiNode> {
    let mut by_anchor: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, node) in nodes.iter().enumerate() {
        if let Some(anchor) = observation_anchor(node, trace) {
            by_anchor.entry(anchor).or_default().push(pos);
        }
    }
    let mut keep = vec![true; nodes.len()];
    let mut retype = HashSet::new();
    for (anchor, members) in &by_anchor {
        let kept = members
            .iter()
            .copied()
            .find(|&p| nodes[p].node_type == NodeType::E)
            .unwrap_or_else(|| {
                retype.insert(members[0]);
                members[0]
            });
        for &p in members {
            if p != kept {
                keep[p] = false;
            }
        }
        // ledger in node order for a stable snapshot
        for &p in members {
            let node = &nodes[p];
            if p == kept && retype.contains(&p) {
                ledger.push(
                    WarningCategory::NodeTypeCorrectedEOnly,
                    &node.node_id,
                    format!(
                        "{} node on observation message {anchor} retyped to E",
                        node.node_type
                    ),
                );
                // commitments skipped the quote check; evidence does not
                if node.node_type == NodeType::C {
                    for s in &node.support {
                        if let Some(problem) = quote_problem(s, trace) {
                            ledger.push(WarningCategory::NonVerbatimQuoteNode, &node.node_id, problem);
                        }
                    }
                }
            } else if p != kept {
                ledger.push(
                    WarningCategory::ExtraNodeAtObservationRemoved,
                    &node.node_id,
                    format!(
                        "extra {} node on observation message {anchor} removed",
                        node.node_type
                    ),
                );
            }
        }
    }
    nodes
        .into_iter()
        .enumerate()
        .filter(|(p, _)| keep[*p])
        .map(|(p, mut n)| {
            if retype.contains(&p) {
                n.node_type = NodeType::E;
            }
            n
        })
        .collect()
}

fn enforce_single_final_answer(nodes: Vec<EpiNode>, ledger: &mut WarningLedger) -> Vec<EpiNode> {
    let mut seen_messages = HashSet::new();
    nodes
        .into_iter()
        .filter(|n| {
            if n.node_type != NodeType::F || seen_messages.insert(n.time) {
                return true;
            }
            ledger.push(
                WarningCategory::OtherStructural,
                &n.node_id,
                format!("second F node on message {} removed", n.time),
            );
            false
        })
        .collect()
}

fn check_edges(
    draft: &GraphDraft,
    trace: &Trace,
    nodes: &[EpiNode],
    ledger: &mut WarningLedger,
) -> Vec<EpiEdge> {
    let types: HashMap<&str, NodeType> = nodes
        .iter()
        .map(|n| (n.node_id.as_str(), n.node_type))
        .collect();
    let mut seen: HashSet<(String, String, Relation)> = HashSet::new();
    let mut edges = Vec::with_capacity(draft.edges.len());
    for raw in &draft.edges {
        let id = format!("{}-[{}]->{}", raw.src, raw.relation, raw.dst);
        let relation = match raw.relation.parse::<Relation>() {
            Ok(r) => r,
            Err(msg) => {
                ledger.push(WarningCategory::SchemaViolation, id, msg);
                continue;
            }
        };
        let Some(time) = raw.support.iter().map(|s| s.msg_idx).min() else {
            ledger.push(WarningCategory::SchemaViolation, id, "edge has no support quotes");
            continue;
        };
        if raw.src == raw.dst {
            ledger.push(WarningCategory::OtherStructural, id, "self-loop removed");
            continue;
        }
        let (src_type, dst_type) = match (types.get(raw.src.as_str()), types.get(raw.dst.as_str()))
        {
            (Some(&s), Some(&d)) => (s, d),
            (s, _) => {
                let missing = if s.is_none() { &raw.src } else { &raw.dst };
                ledger.push(
                    WarningCategory::OtherStructural,
                    id,
                    format!("endpoint `{missing}` does not exist; edge removed"),
                );
                continue;
            }
        };
        if !allowed(relation, src_type, dst_type) {
            ledger.push(
                WarningCategory::DisallowedCombination,
                id,
                format!("({relation}, {src_type}, {dst_type}) is not permitted; edge removed"),
            );
            continue;
        }
        if !seen.insert((raw.src.clone(), raw.dst.clone(), relation)) {
            ledger.push(
                WarningCategory::OtherStructural,
                id,
                "duplicate edge removed",
            );
            continue;
        }
        if raw.time != Some(time) {
            ledger.push(
                WarningCategory::OtherStructural,
                &id,
                format!(
                    "time corrected from {} to earliest support {time}",
                    raw.time.map_or("none".to_string(), |t| t.to_string())
                ),
            );
        }
        for s in &raw.support {
            if let Some(problem) = quote_problem(s, trace) {
                ledger.push(WarningCategory::NonVerbatimQuoteEdge, &id, problem);
            }
        }
        edges.push(EpiEdge {
            src: raw.src.clone(),
            dst: raw.dst.clone(),
            relation,
            time,
            support: raw.support.clone(),
        });
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{RawEdge, RawNode};
    use crate::trace::Message;

    fn trace() -> Trace {
        Trace {
            trace_id: "t".into(),
            model: "m".into(),
            environment: "env".into(),
            scope: 1,
            scaffold: "react".into(),
            task_id: "task".into(),
            trial: 0,
            outcome_score: 0.0,
            messages: vec![
                Message::new(0, Role::User, "Identify the unknown ion."),
                Message::new(1, Role::Assistant, "I think it is chloride. Let me test with silver nitrate."),
                Message::new(2, Role::Observation, "A white precipitate formed."),
            ],
        }
    }

    fn node(id: &str, ty: &str, msg: usize, quote: &str) -> RawNode {
        RawNode {
            node_id: id.into(),
            node_type: ty.into(),
            time: Some(msg),
            text: quote.into(),
            support: vec![Support::new(msg, quote)],
        }
    }

    fn edge(src: &str, dst: &str, rel: &str, msg: usize, quote: &str) -> RawEdge {
        RawEdge {
            src: src.into(),
            dst: dst.into(),
            relation: rel.into(),
            time: Some(msg),
            support: vec![Support::new(msg, quote)],
        }
    }

    fn base() -> GraphDraft {
        GraphDraft {
            trace_id: "t".into(),
            nodes: vec![
                node("N1", "H", 1, "I think it is chloride."),
                node("N2", "T", 1, "Let me test with silver nitrate."),
                node("N3", "E", 2, "A white precipitate formed."),
            ],
            edges: vec![
                edge("N1", "N2", "tests", 1, "Let me test with silver nitrate."),
                edge("N2", "N3", "observes", 2, "A white precipitate formed."),
            ],
        }
    }

    #[test]
    fn clean_graph_has_empty_ledger() {
        let (g, ledger) = validate_graph(&base(), &trace()).unwrap();
        assert!(ledger.is_empty(), "{ledger:?}");
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn disallowed_edge_removed() {
        let mut d = base();
        d.edges.push(edge("N3", "N2", "tests", 2, "A white precipitate formed."));
        let (g, ledger) = validate_graph(&d, &trace()).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert_eq!(ledger.categories(), vec![WarningCategory::DisallowedCombination]);
    }

    #[test]
    fn altered_quote_retained_with_warning() {
        let mut d = base();
        d.nodes[0].support[0].quote = "I think it is chlorine.".into();
        let (g, ledger) = validate_graph(&d, &trace()).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(ledger.categories(), vec![WarningCategory::NonVerbatimQuoteNode]);
    }

    #[test]
    fn commitment_may_cite_a_gloss() {
        let mut d = base();
        d.nodes.push(node("N4", "C", 1, "agent settles on chloride without testing alternatives"));
        let (_, ledger) = validate_graph(&d, &trace()).unwrap();
        assert!(ledger.is_empty());
    }

    #[test]
    fn missing_endpoint_and_unknown_type() {
        let mut d = base();
        d.nodes.push(node("N4", "X", 1, "I think it is chloride."));
        d.edges.push(edge("N1", "N99", "tests", 1, "Let me test with silver nitrate."));
        d.edges.push(edge("N1", "N2", "uses", 1, "Let me test with silver nitrate."));
        let (g, ledger) = validate_graph(&d, &trace()).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(
            ledger.categories(),
            vec![
                WarningCategory::SchemaViolation,
                WarningCategory::OtherStructural,
                WarningCategory::SchemaViolation
            ]
        );
    }

    #[test]
    fn observation_node_retyped_when_alone() {
        let mut d = base();
        d.nodes[2].node_type = "J".into();
        d.edges.pop();
        let (g, ledger) = validate_graph(&d, &trace()).unwrap();
        assert_eq!(g.nodes[2].node_type, NodeType::E);
        assert_eq!(ledger.categories(), vec![WarningCategory::NodeTypeCorrectedEOnly]);
    }

    #[test]
    fn extra_observation_node_removed() {
        let mut d = base();
        d.nodes.push(node("N4", "H", 2, "A white precipitate formed."));
        let (g, ledger) = validate_graph(&d, &trace()).unwrap();
        assert!(g.node("N4").is_none());
        assert_eq!(
            ledger.categories(),
            vec![WarningCategory::ExtraNodeAtObservationRemoved]
        );
    }

    #[test]
    fn strict_mode_rejects_structural_repairs_only() {
        let strict = ValidateOptions {
            strict: true,
            ..Default::default()
        };
        let mut d = base();
        d.nodes[0].support[0].quote = "paraphrase".into();
        assert!(validate_graph_with(&d, &trace(), strict).is_ok());
        d.edges.push(edge("N3", "N2", "tests", 2, "A white precipitate formed."));
        assert!(matches!(
            validate_graph_with(&d, &trace(), strict),
            Err(GraphError::Rejected { .. })
        ));
    }

    #[test]
    fn trace_mismatch_is_hard_error() {
        let mut d = base();
        d.trace_id = "other".into();
        assert!(matches!(
            validate_graph(&d, &trace()),
            Err(GraphError::TraceMismatch { .. })
        ));
    }

    #[test]
    fn time_corrected_to_earliest_support() {
        let mut d = base();
        d.nodes[0].time = Some(0);
        let (g, ledger) = validate_graph(&d, &trace()).unwrap();
        assert_eq!(g.nodes[0].time, 1);
        assert_eq!(ledger.categories(), vec![WarningCategory::OtherStructural]);
    }

    #[test]
    fn crlf_normalized_before_matching() {
        let mut t = trace();
        t.messages[1].content = "line one\r\nline two".into();
        let d = GraphDraft {
            trace_id: "t".into(),
            nodes: vec![node("N1", "H", 1, "line one\nline two")],
            edges: vec![],
        };
        let (_, ledger) = validate_graph(&d, &t).unwrap();
        assert!(ledger.is_empty());
    }
}
