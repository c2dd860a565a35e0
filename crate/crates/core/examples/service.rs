//! Serve a store over HTTP and exercise the review API once: list traces,
//! fetch one graph, then save and submit a marker annotation.
//!
//! ```text
//! cargo run --example service            # one round trip, then exit
//! cargo run --example service -- serve   # keep serving on 127.0.0.1:8787
//! ```

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use epitrace::graph::{validate_graph, GraphDraft};
use epitrace::service::{router, serve, AppState};
use epitrace::store::{GraphRecord, Store};
use epitrace::trace::parse_trace;
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("epitrace-example-store");
    let store = Store::open(&root)?;
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/traces/spectra-s1-t22.json");
    let trace = parse_trace(&std::fs::read_to_string(fixture)?)?;
    store.put_trace(&trace)?;
    let (graph, warnings) = validate_graph(&GraphDraft::new(&trace.trace_id), &trace)?;
    store.put_graph(&GraphRecord { graph, warnings })?;

    let state = AppState { store: Arc::new(store), token: None };
    let rt = tokio::runtime::Runtime::new()?;

    if std::env::args().nth(1).as_deref() == Some("serve") {
        let addr: SocketAddr = "127.0.0.1:8787".parse()?;
        println!("serving {} on http://{addr}", root.display());
        return Ok(rt.block_on(serve(addr, state))?);
    }

    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    rt.spawn(async move { axum::serve(listener, router(state)).await });

    let client = reqwest::blocking::Client::new();
    let traces: Value = client.get(format!("{base}/traces")).send()?.json()?;
    println!("GET /traces -> {traces}");
    let graph: Value = client.get(format!("{base}/traces/{}/graph", trace.trace_id)).send()?.json()?;
    println!("GET graph -> {} nodes", graph["nodes"].as_array().map_or(0, Vec::len));

    let annotation = json!({
        "trace_id": trace.trace_id,
        "annotator_id": "reviewer-1",
        "nodes": {
            "2": {"markers": ["planning_statement"]},
            "4": {"markers": ["reasoning_statement", "missing_validation"], "note": "acetyl never checked"}
        }
    });
    let url = format!("{base}/annotations/{}/reviewer-1", trace.trace_id);
    let resp = client.put(&url).json(&annotation).send()?;
    println!("PUT annotation -> {} etag {:?}", resp.status(), resp.headers().get("etag"));
    let resp = client.post(format!("{url}/submit")).send()?;
    println!("POST submit -> {}", resp.status());
    println!("{}", resp.text()?);
    Ok(())
}
