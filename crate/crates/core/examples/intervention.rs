//! Build a seeded history for a trace-intervention trial: pick an eligible
//! key from a small corpus, draw a successful trace, keep all but its last
//! assistant turn and replay the recorded observations.
//!
//! ```text
//! cargo run --example intervention
//! ```

use epitrace::intervention::{
    build_seed_history, InterventionSpec, PoolKind, RegistryKey, RegistryOptions, ReplayExecutor,
    TraceRegistry,
};
use epitrace::trace::{Message, Role, ToolCall, Trace, TraceCorpus};

fn trial(trial: u32, solved: bool) -> Trace {
    let call = |name: &str| ToolCall { name: name.into(), arguments: serde_json::Map::new() };
    let mut messages = vec![Message::new(0, Role::User, "Identify the compound.")];
    messages[0].is_task_description = true;
    for (turn, tool) in ["proton_nmr_spectra", "mass_spectrometry_spectra", "ir_spectra"].iter().enumerate() {
        let i = messages.len();
        messages.push(Message::new(i, Role::Assistant, format!("Turn {turn}: checking {tool}.")).with_tool_calls(vec![call(tool)]));
        messages.push(Message::new(i + 1, Role::Observation, format!("{tool} output, trial {trial}")));
    }
    let i = messages.len();
    messages.push(Message::new(i, Role::Assistant, if solved { "4-phenylbutan-2-one" } else { "acetophenone" }));
    Trace {
        trace_id: format!("spectra-017-t{trial}"),
        model: "model-a".into(),
        environment: "spectra".into(),
        scope: 1,
        scaffold: "tool_calling".into(),
        task_id: "spectra-017".into(),
        trial,
        outcome_score: if solved { 1.0 } else { 0.0 },
        messages,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = TraceCorpus::from_traces((0..5).map(|t| trial(t, t % 2 == 0)))?;
    let registry = TraceRegistry::build(&corpus, RegistryOptions::default());
    println!("{} eligible key(s), {} excluded", registry.entries.len(), registry.excluded.len());

    let key = RegistryKey {
        environment: "spectra".into(),
        agent: "model-a/tool_calling".into(),
        task: "spectra-017".into(),
    };
    let spec = InterventionSpec::new(PoolKind::Success, -1, 42)?;
    let source = registry.draw(&key, &spec)?;
    println!("drew {}", source.trace_id);

    let history = build_seed_history(&source, &spec, &ReplayExecutor::from_trace(&source))?;
    for m in &history.messages {
        println!("  [{}] {:<11} {}", m.index, m.role.as_str(), m.content);
    }
    println!("continue at temperature {}", history.temperature);
    Ok(())
}
