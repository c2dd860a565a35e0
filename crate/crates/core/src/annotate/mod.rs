//! Two-stage LLM annotation of a trace into an epistemic graph.
//!
//! Stage 1 labels nodes in overlapping message windows. The window results
//! are merged, unlabeled observations receive an evidence node, and stage 2
//! proposes edges among the merged nodes visible in each window. The merged
//! result is then validated against the trace.

mod backend;
mod prompts;
mod windows;

use std::env;
use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::graph::{
    merge_window_annotations, validate_graph_with, EpistemicGraph, GraphDraft, GraphError, RawEdge,
    RawNode, Support, ValidateOptions, WarningLedger,
};
use crate::trace::{annotatable_messages, AnnotationMode, Message, Role, Trace};

pub use backend::{
    extract_document, response_text, ChatBackend, ChatMessage, ChatRequest, HttpChatBackend,
};
pub use prompts::{PromptSet, PromptVersion};
pub use windows::{make_windows, WindowSpec};

pub const ENV_ENDPOINT: &str = "EPITRACE_ANNOTATOR_URL";
pub const ENV_TOKEN: &str = "EPITRACE_ANNOTATOR_TOKEN";
pub const ENV_MODEL: &str = "EPITRACE_ANNOTATOR_MODEL";

/// Characters of an observation kept as the text of an automatic E node.
pub const AUTO_EVIDENCE_TEXT_CHARS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Nodes,
    Edges,
}

impl Stage {
    fn key(self) -> &'static str {
        match self {
            Stage::Nodes => "nodes",
            Stage::Edges => "edges",
        }
    }
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("annotator endpoint unreachable: {0}")]
    Transport(String),
    #[error("{stage:?} stage returned no parseable document after {attempts} attempts; last response: {raw}")]
    Unparseable {
        stage: Stage,
        attempts: usize,
        raw: String,
    },
    #[error("annotator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatorConfig {
    pub endpoint: String,
    pub token: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    /// Additional attempts after an unparseable response.
    pub max_retries: usize,
    pub request_timeout: Duration,
    /// Concurrent window requests per stage.
    pub max_in_flight: usize,
    pub prompt_version: PromptVersion,
    pub validate: ValidateOptions,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            token: None,
            model_name: "claude-sonnet-4-5".into(),
            temperature: 0.7,
            max_retries: 2,
            request_timeout: Duration::from_secs(300),
            max_in_flight: 4,
            prompt_version: PromptVersion::default(),
            validate: ValidateOptions::default(),
        }
    }
}

impl AnnotatorConfig {
    /// Defaults overridden by the annotator environment variables.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(v) = env::var(ENV_ENDPOINT) {
            cfg.endpoint = v;
        }
        if let Ok(v) = env::var(ENV_MODEL) {
            cfg.model_name = v;
        }
        cfg.token = env::var(ENV_TOKEN).ok().filter(|t| !t.is_empty());
        cfg
    }

    pub fn check(&self) -> Result<(), AnnotateError> {
        if !(self.temperature >= 0.0) {
            return Err(AnnotateError::Config("temperature must be >= 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(AnnotateError::Config("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }

    pub fn http_backend(&self) -> Result<HttpChatBackend, AnnotateError> {
        HttpChatBackend::new(self.endpoint.clone(), self.token.clone(), self.request_timeout)
    }
}

#[derive(Serialize)]
struct PayloadMessage<'a> {
    msg_idx: usize,
    role: Role,
    content: &'a str,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tool_calls: Vec<String>,
}

#[derive(Serialize)]
struct PayloadNode<'a> {
    node_id: &'a str,
    #[serde(rename = "type")]
    node_type: &'a str,
    time: Option<usize>,
    text: &'a str,
}

fn window_payload(window: &[&Message]) -> String {
    let msgs: Vec<PayloadMessage> = window
        .iter()
        .map(|m| PayloadMessage {
            msg_idx: m.index,
            role: m.role,
            content: &m.content,
            tool_calls: m.tool_calls().iter().map(|c| c.render()).collect(),
        })
        .collect();
    serde_json::to_string_pretty(&msgs).expect("payload serializes")
}

fn nodes_payload(nodes: &[RawNode]) -> String {
    let list: Vec<PayloadNode> = nodes
        .iter()
        .map(|n| PayloadNode {
            node_id: &n.node_id,
            node_type: &n.node_type,
            time: n.time,
            text: &n.text,
        })
        .collect();
    serde_json::to_string_pretty(&list).expect("payload serializes")
}

fn request(cfg: &AnnotatorConfig, system: &str, user: String) -> ChatRequest {
    ChatRequest {
        model: cfg.model_name.clone(),
        temperature: cfg.temperature,
        messages: vec![
            ChatMessage {
                role: "system".into(),
                content: system.to_string(),
            },
            ChatMessage {
                role: "user".into(),
                content: user,
            },
        ],
    }
}

/// Stage-1 request for one window.
pub fn stage1_request(window: &[&Message], cfg: &AnnotatorConfig) -> ChatRequest {
    let p = cfg.prompt_version.prompts();
    let user = format!("{}\nMessages:\n{}\n", p.stage1_user, window_payload(window));
    request(cfg, p.stage1_system, user)
}

/// Stage-2 request for one window and the nodes visible in it.
pub fn stage2_request(window: &[&Message], nodes: &[RawNode], cfg: &AnnotatorConfig) -> ChatRequest {
    let p = cfg.prompt_version.prompts();
    let user = format!(
        "{}\nMessages:\n{}\n\nNodes:\n{}\n",
        p.stage2_user,
        window_payload(window),
        nodes_payload(nodes)
    );
    request(cfg, p.stage2_system, user)
}

/// Sends `req` until a document with the stage key parses into `T`,
/// re-sending the identical request on failure.
fn exchange<T: serde::de::DeserializeOwned>(
    backend: &dyn ChatBackend,
    req: &ChatRequest,
    stage: Stage,
    max_retries: usize,
) -> Result<Vec<T>, AnnotateError> {
    let mut raw = String::new();
    for _ in 0..=max_retries {
        raw = backend.complete(req)?;
        let text = response_text(&raw);
        let parsed = extract_document(&text, stage.key())
            .and_then(|mut doc| doc.get_mut(stage.key()).map(Value::take))
            .and_then(|items| serde_json::from_value::<Vec<T>>(items).ok());
        if let Some(items) = parsed {
            return Ok(items);
        }
    }
    Err(AnnotateError::Unparseable {
        stage,
        attempts: max_retries + 1,
        raw,
    })
}

/// Node labels for one window. Types are returned as given; unknown types
/// are dropped later by validation.
pub fn run_stage1(
    backend: &dyn ChatBackend,
    window: &[&Message],
    cfg: &AnnotatorConfig,
) -> Result<Vec<RawNode>, AnnotateError> {
    if window.is_empty() {
        return Ok(Vec::new());
    }
    exchange(backend, &stage1_request(window, cfg), Stage::Nodes, cfg.max_retries)
}

/// Edges among `nodes` for one window.
pub fn run_stage2(
    backend: &dyn ChatBackend,
    window: &[&Message],
    nodes: &[RawNode],
    cfg: &AnnotatorConfig,
) -> Result<Vec<RawEdge>, AnnotateError> {
    if window.is_empty() || nodes.is_empty() {
        return Ok(Vec::new());
    }
    exchange(
        backend,
        &stage2_request(window, nodes, cfg),
        Stage::Edges,
        cfg.max_retries,
    )
}

/// Runs `job` over `0..n` with at most `limit` jobs in flight and returns
/// the results in index order.
fn bounded_map<T: Send>(
    n: usize,
    limit: usize,
    job: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..limit.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let out = job(i);
                slots.lock().expect("result lock")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|s| s.expect("every job ran"))
        .collect()
}

/// Evidence nodes for observation messages no node cites.
fn auto_evidence(trace_id: &str, messages: &[&Message], nodes: &[RawNode]) -> GraphDraft {
    let cited: std::collections::HashSet<usize> = nodes
        .iter()
        .flat_map(|n| n.support.iter().map(|s| s.msg_idx))
        .collect();
    let mut draft = GraphDraft::new(trace_id);
    for m in messages
        .iter()
        .filter(|m| m.role == Role::Observation && !cited.contains(&m.index))
    {
        draft.nodes.push(RawNode {
            node_id: format!("auto-E-{}", m.index),
            node_type: "E".into(),
            time: Some(m.index),
            text: m.content.chars().take(AUTO_EVIDENCE_TEXT_CHARS).collect(),
            support: vec![Support::new(m.index, m.content.clone())],
        });
    }
    draft
}

fn first_error<T>(results: Vec<Result<T, AnnotateError>>) -> Result<Vec<T>, AnnotateError> {
    results.into_iter().collect()
}

/// Full pipeline for one trace: windowed stage 1, merge, automatic evidence
/// nodes, windowed stage 2, merge, validation.
pub fn annotate_trace(
    trace: &Trace,
    backend: &dyn ChatBackend,
    cfg: &AnnotatorConfig,
    spec: WindowSpec,
) -> Result<(EpistemicGraph, WarningLedger), AnnotateError> {
    cfg.check()?;
    spec.check()?;
    let messages = annotatable_messages(trace, AnnotationMode::Epistemic);
    if messages.is_empty() {
        return Ok((EpistemicGraph::empty(&trace.trace_id), WarningLedger::default()));
    }
    let windows: Vec<Range<usize>> = make_windows(messages.len(), spec);

    let stage1 = first_error(bounded_map(windows.len(), cfg.max_in_flight, |w| {
        run_stage1(backend, &messages[windows[w].clone()], cfg)
    }))?;
    let fragments: Vec<GraphDraft> = stage1
        .into_iter()
        .map(|nodes| GraphDraft {
            trace_id: trace.trace_id.clone(),
            nodes,
            edges: Vec::new(),
        })
        .collect();
    let merged = merge_window_annotations(&fragments)?;
    let auto = auto_evidence(&trace.trace_id, &messages, &merged.nodes);
    let with_evidence = merge_window_annotations(&[merged, auto])?;

    let visible: Vec<Vec<RawNode>> = windows
        .iter()
        .map(|r| {
            let first = messages[r.start].index;
            let last = messages[r.end - 1].index;
            with_evidence
                .nodes
                .iter()
                .filter(|n| n.time.is_some_and(|t| (first..=last).contains(&t)))
                .cloned()
                .collect()
        })
        .collect();
    let stage2 = first_error(bounded_map(windows.len(), cfg.max_in_flight, |w| {
        run_stage2(backend, &messages[windows[w].clone()], &visible[w], cfg)
    }))?;
    let mut edge_fragments = vec![with_evidence.clone()];
    edge_fragments.extend(stage2.into_iter().zip(visible).map(|(edges, nodes)| GraphDraft {
        trace_id: trace.trace_id.clone(),
        nodes,
        edges,
    }));
    let draft = merge_window_annotations(&edge_fragments)?;
    Ok(validate_graph_with(&draft, trace, cfg.validate)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Canned {
        stage1: String,
        stage2: String,
        calls: AtomicUsize,
    }

    impl ChatBackend for Canned {
        fn complete(&self, request: &ChatRequest) -> Result<String, AnnotateError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if request.messages[1].content.contains("\nNodes:\n") {
                Ok(self.stage2.clone())
            } else {
                Ok(self.stage1.clone())
            }
        }
    }

    fn canned(stage1: &str, stage2: &str) -> Canned {
        Canned {
            stage1: stage1.into(),
            stage2: stage2.into(),
            calls: AtomicUsize::new(0),
        }
    }

    fn three_message_trace() -> Trace {
        let mut task = Message::new(0, Role::User, "Identify the compound.");
        task.is_task_description = true;
        Trace {
            trace_id: "t3".into(),
            model: "m".into(),
            environment: "spectra".into(),
            scope: 1,
            scaffold: "react".into(),
            task_id: "x".into(),
            trial: 0,
            outcome_score: 0.0,
            messages: vec![
                task,
                Message::new(1, Role::Assistant, "I think the compound is an ester."),
                Message::new(2, Role::Observation, "IR: 1735 cm-1"),
            ],
        }
    }

    #[test]
    fn observation_gets_auto_evidence() {
        let stage1 = r#"{"nodes":[{"node_id":"N1","type":"H","time":1,"text":"ester","support":[{"msg_idx":1,"quote":"the compound is an ester"}]}]}"#;
        let b = canned(stage1, r#"{"edges":[]}"#);
        let (g, ledger) =
            annotate_trace(&three_message_trace(), &b, &AnnotatorConfig::default(), WindowSpec::default())
                .unwrap();
        assert!(ledger.is_empty(), "{ledger:?}");
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.nodes[1].node_type, crate::graph::NodeType::E);
        assert_eq!(g.nodes[1].time, 2);
        assert_eq!(g.nodes[1].text, "IR: 1735 cm-1");
    }

    #[test]
    fn empty_trace_makes_no_requests() {
        let mut t = three_message_trace();
        t.messages = vec![Message::new(0, Role::System, "sys")];
        let b = canned("", "");
        let (g, ledger) =
            annotate_trace(&t, &b, &AnnotatorConfig::default(), WindowSpec::default()).unwrap();
        assert!(g.nodes.is_empty() && g.edges.is_empty() && ledger.is_empty());
        assert_eq!(b.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn unparseable_output_retried_then_surfaced() {
        let b = canned("I cannot comply.", "");
        let cfg = AnnotatorConfig {
            max_retries: 2,
            ..AnnotatorConfig::default()
        };
        let err = annotate_trace(&three_message_trace(), &b, &cfg, WindowSpec::default()).unwrap_err();
        match err {
            AnnotateError::Unparseable { attempts, raw, .. } => {
                assert_eq!(attempts, 3);
                assert_eq!(raw, "I cannot comply.");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(b.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn unknown_type_becomes_schema_violation() {
        let stage1 = r#"{"nodes":[{"node_id":"N1","type":"X","time":1,"text":"?","support":[{"msg_idx":1,"quote":"ester"}]}]}"#;
        let b = canned(stage1, r#"{"edges":[]}"#);
        let (g, ledger) =
            annotate_trace(&three_message_trace(), &b, &AnnotatorConfig::default(), WindowSpec::default())
                .unwrap();
        assert_eq!(ledger.count(crate::graph::WarningCategory::SchemaViolation), 1);
        assert!(g.nodes.iter().all(|n| n.node_type == crate::graph::NodeType::E));
    }

    #[test]
    fn request_shape() {
        let t = three_message_trace();
        let msgs: Vec<&Message> = t.messages.iter().collect();
        let r = stage1_request(&msgs, &AnnotatorConfig::default());
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["temperature"], 0.7);
        assert_eq!(v["messages"][0]["role"], "system");
        assert!(v["messages"][1]["content"].as_str().unwrap().contains("\"msg_idx\": 2"));
    }
}
