//! Validate a hand-written graph draft against its trace and read the
//! warning ledger. The draft has one quote that is not in the trace, one
//! edge outside the whitelist and a non-E node on an observation message.
//!
//! ```text
//! cargo run --example validate_graph
//! ```

use std::path::Path;

use epitrace::graph::{
    merge_window_annotations, validate_graph, GraphDraft, RawEdge, RawNode, Support,
};
use epitrace::trace::parse_trace;

fn node(id: &str, ty: &str, msg: usize, quote: &str) -> RawNode {
    RawNode {
        node_id: id.into(),
        node_type: ty.into(),
        time: Some(msg),
        text: quote.into(),
        support: vec![Support::new(msg, quote)],
    }
}

fn edge(src: &str, relation: &str, dst: &str, msg: usize, quote: &str) -> RawEdge {
    RawEdge {
        src: src.into(),
        dst: dst.into(),
        relation: relation.into(),
        time: Some(msg),
        support: vec![Support::new(msg, quote)],
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/traces/spectra-s1-t22.json");
    let trace = parse_trace(&std::fs::read_to_string(path)?)?;

    // two overlapping windows, as the annotator would produce them
    let mut first = GraphDraft::new(&trace.trace_id);
    first.nodes = vec![
        node("N1", "T", 2, "Let me start with the proton NMR spectrum."),
        node("N2", "E", 3, "Deltas 2.23 (s, 3H)"),
        node("N3", "H", 4, "a methyl group attached to a carbonyl (acetyl groups)"),
    ];
    first.edges = vec![
        edge("N1", "observes", "N2", 3, "Deltas 2.23 (s, 3H)"),
        edge("N2", "informs", "N3", 4, "The singlet at 2.23 ppm"),
    ];
    let mut second = GraphDraft::new(&trace.trace_id);
    second.nodes = vec![
        node("N1", "H", 4, "a methyl group attached to a carbonyl (acetyl groups)"),
        node("N2", "J", 5, "m/z 224.12 (intensity 100)"),
    ];
    second.edges = vec![edge("N2", "tests", "N1", 5, "m/z 224.12")];

    let draft = merge_window_annotations(&[first, second])?;
    println!("merged draft: {} nodes, {} edges", draft.nodes.len(), draft.edges.len());

    let (graph, ledger) = validate_graph(&draft, &trace)?;
    for n in &graph.nodes {
        println!("{} {:?} @{}  {}", n.node_id, n.node_type, n.time, n.text);
    }
    for e in &graph.edges {
        println!("{} -[{}]-> {}", e.src, e.relation.as_str(), e.dst);
    }
    println!("\n{} warning(s):", ledger.len());
    for w in &ledger.entries {
        println!("  {:<28} {:<20} {}", w.category.as_str(), w.node_or_edge_id, w.detail);
    }
    Ok(())
}
