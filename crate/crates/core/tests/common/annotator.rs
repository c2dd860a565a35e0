//! Stub chat-completion endpoint and the canned annotator responses used for
//! exact ledger snapshots.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::HeaderMap;
use axum::routing::post;
use axum::{Json, Router};
use epitrace::annotate::{PromptVersion, ChatRequest};
use epitrace::graph::{NodeType, Relation, WarningCategory, WarningEntry};
use serde_json::{json, Value};

use super::spawn_server;

pub struct Stub {
    pub endpoint: String,
    pub calls: Arc<AtomicUsize>,
    /// Authorization header of every request.
    pub auth: Arc<std::sync::Mutex<Vec<Option<String>>>>,
}

impl Stub {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

fn envelope(content: &str) -> Value {
    json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]
    })
}

/// Serves `stage1` for node requests and `stage2` for edge requests, each
/// inside a completion envelope.
pub fn stub_annotator(stage1: Value, stage2: Value) -> Stub {
    let calls = Arc::new(AtomicUsize::new(0));
    let auth = Arc::new(std::sync::Mutex::new(Vec::new()));
    let (c, a) = (calls.clone(), auth.clone());
    let router = Router::new().route(
        "/v1/chat/completions",
        post(move |headers: HeaderMap, Json(req): Json<ChatRequest>| {
            c.fetch_add(1, Ordering::SeqCst);
            a.lock().unwrap().push(
                headers
                    .get("authorization")
                    .and_then(|v| v.to_str().ok())
                    .map(str::to_string),
            );
            let body = if req.messages[1].content.contains("\nNodes:\n") {
                &stage2
            } else {
                &stage1
            };
            let content = format!("Here is the annotation.\n```json\n{body}\n```");
            std::future::ready(Json(envelope(&content)))
        }),
    );
    Stub {
        endpoint: format!("{}/v1/chat/completions", spawn_server(router)),
        calls,
        auth,
    }
}

/// Stage-1 output for `spectra-s1-t22` with one fault of each kind.
pub fn faulty_stage1() -> Value {
    json!({"nodes": [
        {"node_id": "a", "type": "T", "time": 2, "text": "Acquire the proton NMR spectrum",
         "support": [{"msg_idx": 2, "quote": "proton_nmr_spectra"}]},
        {"node_id": "b", "type": "E", "time": 3, "text": "Methyl singlet at 2.23 ppm",
         "support": [{"msg_idx": 3, "quote": "2.23 (s, 3H)"}]},
        {"node_id": "c", "type": "J", "time": 3, "text": "Two aromatic protons downfield",
         "support": [{"msg_idx": 3, "quote": "7.90 (ddd, 2H)"}]},
        {"node_id": "d", "type": "H", "time": 4, "text": "An ethylene bridge links the fragments",
         "support": [{"msg_idx": 4, "quote": "two CH2 groups coupled to each other"}]},
        {"node_id": "e", "type": "H", "time": 4, "text": "A methyl ketone is present",
         "support": [{"msg_idx": 4, "quote": "a methyl group attached to a carbonyl (acetyl groups)"}]},
        {"node_id": "f", "type": "T", "time": 4, "text": "Check the molecular mass",
         "support": [{"msg_idx": 4, "quote": "mass_spectrometry_spectra"}]},
        {"node_id": "g", "type": "X", "time": 4, "text": "Substituted benzene",
         "support": [{"msg_idx": 4, "quote": "a substituted benzene ring"}]},
        {"node_id": "h", "type": "J", "time": 5, "text": "Molecular ion at 224",
         "support": [{"msg_idx": 5, "quote": "m/z 224.12"}]}
    ]})
}

/// Stage-2 output against the merged ids of [`faulty_stage1`]: a=N1, b=N2,
/// c=N3, d=N4, e=N5, f=N6, g=N7, h=N8.
pub fn faulty_stage2() -> Value {
    json!({"edges": [
        {"src": "N1", "dst": "N2", "relation": "observes", "time": 2,
         "support": [{"msg_idx": 2, "quote": "proton_nmr_spectra"}]},
        {"src": "N2", "dst": "N4", "relation": "informs", "time": 4,
         "support": [{"msg_idx": 4, "quote": "suggest two CH2 groups"}]},
        {"src": "N2", "dst": "N1", "relation": "tests", "time": 3,
         "support": [{"msg_idx": 3, "quote": "2.23"}]},
        {"src": "N4", "dst": "N6", "relation": "tests", "time": 4,
         "support": [{"msg_idx": 4, "quote": "mass spectrometry"}]},
        {"src": "N4", "dst": "N99", "relation": "informs", "time": 4,
         "support": [{"msg_idx": 4, "quote": "aromatic signals"}]},
        {"src": "N6", "dst": "N8", "relation": "observes", "time": 5,
         "support": [{"msg_idx": 4, "quote": "mass_spectrometry_spectra"}]},
        {"src": "N3", "dst": "N4", "relation": "informs", "time": 4,
         "support": [{"msg_idx": 4, "quote": "The aromatic signals"}]}
    ]})
}

fn entry(category: WarningCategory, id: &str, detail: &str) -> WarningEntry {
    WarningEntry {
        category,
        node_or_edge_id: id.into(),
        detail: detail.into(),
    }
}

/// Ledger expected from [`faulty_stage1`] and [`faulty_stage2`], worked out
/// by hand from the validation rules.
pub fn faulty_ledger() -> Vec<WarningEntry> {
    use WarningCategory::*;
    vec![
        entry(
            NonVerbatimQuoteNode,
            "N5",
            r#"quote "a methyl group attached to a carbonyl (acetyl groups)" is not a verbatim substring of message 4"#,
        ),
        entry(SchemaViolation, "N7", "unknown node type `X`"),
        entry(ExtraNodeAtObservationRemoved, "N3", "extra J node on observation message 3 removed"),
        entry(NodeTypeCorrectedEOnly, "N8", "J node on observation message 5 retyped to E"),
        entry(DisallowedCombination, "N2-[tests]->N1", "(tests, E, T) is not permitted; edge removed"),
        entry(
            NonVerbatimQuoteEdge,
            "N4-[tests]->N6",
            r#"quote "mass spectrometry" is not a verbatim substring of message 4"#,
        ),
        entry(
            OtherStructural,
            "N4-[informs]->unresolved:N99",
            "endpoint `unresolved:N99` does not exist; edge removed",
        ),
        entry(OtherStructural, "N3-[informs]->N4", "endpoint `N3` does not exist; edge removed"),
    ]
}

/// Every (relation, source, destination) triple listed in the shipped
/// stage-2 prompt, read from lines like `- tests: Allowed only between: H -> T, J -> T.`
pub fn prompt_whitelist() -> BTreeSet<(Relation, NodeType, NodeType)> {
    let prompt = PromptVersion::Optimized.prompts().stage2_user;
    let mut out = BTreeSet::new();
    for line in prompt.lines() {
        let Some(rest) = line.strip_prefix("- ") else { continue };
        let Some((relation, pairs)) = rest.split_once(": Allowed only between: ") else {
            continue;
        };
        let relation: Relation = relation.trim().parse().unwrap();
        for pair in pairs.trim_end_matches('.').split(", ") {
            let (s, d) = pair.split_once(" -> ").unwrap();
            out.insert((relation, s.trim().parse().unwrap(), d.trim().parse().unwrap()));
        }
    }
    out
}
