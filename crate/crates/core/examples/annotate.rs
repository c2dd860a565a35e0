//! Two-stage annotation of one trace. With `EPITRACE_ANNOTATOR_URL` set the
//! request goes to that chat-completion endpoint (plus `EPITRACE_ANNOTATOR_TOKEN` and
//! `EPITRACE_ANNOTATOR_MODEL` when present); otherwise a canned backend stands in so
//! the example runs offline.
//!
//! ```text
//! cargo run --example annotate
//! EPITRACE_ANNOTATOR_URL=http://localhost:8000/v1/chat/completions cargo run --example annotate
//! ```

use std::path::Path;

use epitrace::annotate::{
    annotate_trace, AnnotateError, AnnotatorConfig, ChatBackend, ChatRequest, WindowSpec,
    ENV_ENDPOINT, ENV_MODEL, ENV_TOKEN,
};
use epitrace::trace::parse_trace;
use serde_json::json;

/// Answers stage 1 with nodes and stage 2 with edges, wrapped the way an
/// OpenAI-compatible server would.
struct Canned;

impl ChatBackend for Canned {
    fn complete(&self, request: &ChatRequest) -> Result<String, AnnotateError> {
        let prompt = &request.messages.last().expect("user message").content;
        let doc = if prompt.contains("\nNodes:\n") {
            json!({"edges": [
                {"src": "N1", "dst": "N2", "relation": "observes", "time": 3,
                 "support": [{"msg_idx": 3, "quote": "Deltas 2.23 (s, 3H)"}]},
                {"src": "N2", "dst": "N3", "relation": "informs", "time": 4,
                 "support": [{"msg_idx": 4, "quote": "The singlet at 2.23 ppm suggests"}]}
            ]})
        } else {
            json!({"nodes": [
                {"node_id": "N1", "type": "T", "time": 2, "text": "Acquire the proton NMR spectrum",
                 "support": [{"msg_idx": 2, "quote": "Let me start with the proton NMR spectrum."}]},
                {"node_id": "N2", "type": "E", "time": 3, "text": "Methyl singlet at 2.23 ppm",
                 "support": [{"msg_idx": 3, "quote": "Deltas 2.23 (s, 3H)"}]},
                {"node_id": "N3", "type": "H", "time": 4, "text": "Acetyl group present",
                 "support": [{"msg_idx": 4, "quote": "a methyl group attached to a carbonyl (acetyl group)"}]}
            ]})
        };
        let content = format!("Here is the annotation.\n```json\n{doc:#}\n```");
        Ok(json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/traces/spectra-s1-t22.json");
    let trace = parse_trace(&std::fs::read_to_string(path)?)?;

    let mut cfg = AnnotatorConfig::default();
    let (graph, ledger) = match std::env::var(ENV_ENDPOINT) {
        Ok(endpoint) => {
            cfg.endpoint = endpoint;
            cfg.token = std::env::var(ENV_TOKEN).ok();
            if let Ok(model) = std::env::var(ENV_MODEL) {
                cfg.model_name = model;
            }
            annotate_trace(&trace, &cfg.http_backend()?, &cfg, WindowSpec::default())?
        }
        Err(_) => annotate_trace(&trace, &Canned, &cfg, WindowSpec::default())?,
    };

    println!("{}", serde_json::to_string_pretty(&graph)?);
    println!("{} warning(s)", ledger.len());
    for w in &ledger.entries {
        println!("  {} {} {}", w.category.as_str(), w.node_or_edge_id, w.detail);
    }
    Ok(())
}
