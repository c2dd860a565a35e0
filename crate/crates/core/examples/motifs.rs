//! Detect motifs on the illustrated breakdown graphs and tabulate
//! prevalence per model.
//!
//! ```text
//! cargo run --example motifs
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use epitrace::graph::EpistemicGraph;
use epitrace::motif::{detect, prevalence, GroupKey, MotifHit, Polarity};
use epitrace::trace::{Message, Role, Trace, TraceCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/motifs");
    let names = ["evidence_non_uptake", "untested_claim", "fixed_belief_trace", "contradiction_without_repair"];

    let mut results: BTreeMap<String, BTreeSet<MotifHit>> = BTreeMap::new();
    let mut traces = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let graph: EpistemicGraph = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.json")))?)?;
        let hits = detect(&graph);
        println!("{name}:");
        for hit in &hits {
            let kind = match hit.motif.polarity() {
                Polarity::Productive => "+",
                Polarity::Breakdown => "-",
            };
            println!("  {kind} {:<32} {:?}", hit.motif.as_str(), hit.bindings);
        }
        results.insert(graph.trace_id.clone(), hits);
        // stand-in trace metadata so the table has something to group by
        traces.push(Trace {
            trace_id: graph.trace_id.clone(),
            model: if i % 2 == 0 { "model-a" } else { "model-b" }.into(),
            environment: "spectra".into(),
            scope: 1,
            scaffold: "tool_calling".into(),
            task_id: name.to_string(),
            trial: 0,
            outcome_score: 0.0,
            messages: vec![Message::new(0, Role::User, "task")],
        });
    }

    let corpus = TraceCorpus::from_traces(traces)?;
    let report = prevalence(&results, &corpus, &[GroupKey::Model])?;
    print!("\n{}", report.to_wide_csv()?);
    Ok(())
}
