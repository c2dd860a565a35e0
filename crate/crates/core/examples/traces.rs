//! Parse a trace, inspect the messages an annotator sees, and load a corpus.
//!
//! ```text
//! cargo run --example traces
//! ```

use std::path::Path;

use epitrace::trace::{
    annotatable_messages, assistant_turns, parse_trace_with, render, AnnotationMode, IngestOptions,
    TraceCorpus,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/traces");
    let raw = std::fs::read_to_string(fixtures.join("spectra-s1-t22.json"))?;
    let trace = parse_trace_with(&raw, &IngestOptions::default())?;

    let meta = trace.metadata();
    println!("{} ({} / {} / {}), score {}", meta.trace_id, meta.model, meta.environment, meta.scaffold, meta.outcome_score);
    println!("{} assistant turns", assistant_turns(&trace).len());

    for mode in [AnnotationMode::Epistemic, AnnotationMode::Marker] {
        let idx: Vec<usize> = annotatable_messages(&trace, mode).iter().map(|m| m.index).collect();
        println!("{mode:?}: messages {idx:?}");
    }

    // canonical form, byte-stable across parse/render
    let canonical = render(&trace);
    assert_eq!(render(&parse_trace_with(&canonical, &IngestOptions::default())?), canonical);

    let corpus = TraceCorpus::load_dir(&fixtures, &IngestOptions::default())?;
    println!("corpus holds {} trace(s)", corpus.len());
    Ok(())
}
