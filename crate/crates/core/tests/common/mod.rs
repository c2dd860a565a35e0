//! Shared helpers for the integration tests: fixture loading, random graph
//! generation, independent oracles and a local HTTP stub.
#![allow(dead_code)]

pub mod annotator;
pub mod oracle;

use std::collections::BTreeSet;
use std::path::PathBuf;

use epitrace::graph::{
    allowed, validate_graph, EpiEdge, EpiNode, EpistemicGraph, GraphDraft, NodeType, RawEdge,
    RawNode, Relation, Support,
};
use epitrace::irt::{Item, ItemSet, ResponseMatrix};
use epitrace::motif::MotifId;
use epitrace::trace::{parse_trace, Message, Role, ToolCall, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn load_graph(name: &str) -> EpistemicGraph {
    let text = std::fs::read_to_string(fixture_path(&format!("motifs/{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[derive(serde::Deserialize)]
pub struct Expected {
    /// Which of the four illustrated breakdowns should fire.
    pub named: BTreeSet<MotifId>,
    /// Every motif the encoded structure fires.
    pub all: BTreeSet<MotifId>,
}

pub fn load_expected(name: &str) -> Expected {
    let text =
        std::fs::read_to_string(fixture_path(&format!("motifs/{name}.expected.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn load_trace(id: &str) -> Trace {
    parse_trace(&std::fs::read_to_string(fixture_path(&format!("traces/{id}.json"))).unwrap())
        .unwrap()
}

pub const ILLUSTRATED: [(&str, MotifId); 4] = [
    ("evidence_non_uptake", MotifId::EvidenceNonUptake),
    ("untested_claim", MotifId::UntestedClaim),
    ("fixed_belief_trace", MotifId::FixedBeliefTrace),
    ("contradiction_without_repair", MotifId::ContradictionWithoutRepair),
];

/// Nodes as (id, type, time); edges as (src, relation, dst).
pub fn graph(nodes: &[(&str, NodeType, usize)], edges: &[(&str, Relation, &str)]) -> EpistemicGraph {
    EpistemicGraph {
        trace_id: "t".into(),
        nodes: nodes
            .iter()
            .map(|&(id, node_type, time)| EpiNode {
                node_id: id.into(),
                node_type,
                time,
                text: id.into(),
                support: vec![Support::new(time, id)],
            })
            .collect(),
        edges: edges
            .iter()
            .map(|&(s, relation, d)| EpiEdge {
                src: s.into(),
                dst: d.into(),
                relation,
                time: 0,
                support: vec![Support::new(0, "q")],
            })
            .collect(),
    }
}

pub fn call(name: &str) -> ToolCall {
    ToolCall {
        name: name.into(),
        arguments: serde_json::Map::new(),
    }
}

/// System prompt, task, then `turns` assistant turns; turn `i` makes
/// `calls[i]` tool calls, each answered by one observation.
pub fn trace_with_calls(id: &str, calls: &[usize]) -> Trace {
    let mut messages = vec![
        Message::new(0, Role::System, "system prompt"),
        Message::new(1, Role::User, format!("task for {id}")),
    ];
    messages[1].is_task_description = true;
    for (turn, &n) in calls.iter().enumerate() {
        let idx = messages.len();
        let tool_calls = (0..n).map(|c| call(&format!("tool_{turn}_{c}"))).collect();
        messages.push(Message::new(idx, Role::Assistant, format!("turn {turn}")).with_tool_calls(tool_calls));
        for c in 0..n {
            let idx = messages.len();
            messages.push(Message::new(idx, Role::Observation, format!("result {turn}.{c}")));
        }
    }
    Trace {
        trace_id: id.into(),
        model: "model".into(),
        environment: "env".into(),
        scope: 1,
        scaffold: "react".into(),
        task_id: "task".into(),
        trial: 0,
        outcome_score: 0.0,
        messages,
    }
}

/// Trace whose message `i` (for `i` in 1..=steps) reads `step i.`.
pub fn step_trace(steps: usize) -> Trace {
    let mut messages = vec![Message::new(0, Role::User, "task")];
    messages[0].is_task_description = true;
    for i in 1..=steps {
        messages.push(Message::new(i, Role::Assistant, format!("step {i}.")));
    }
    Trace {
        trace_id: "rand".into(),
        model: "m".into(),
        environment: "e".into(),
        scope: 1,
        scaffold: "s".into(),
        task_id: "t".into(),
        trial: 0,
        outcome_score: 0.0,
        messages,
    }
}

/// A draft with up to `max_nodes` nodes over [`step_trace`], biased towards
/// whitelisted edges so that templates actually fire, then validated.
pub fn random_validated_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> EpistemicGraph {
    let steps = 8;
    let trace = step_trace(steps);
    // mostly larger graphs, where the long templates can occur
    let n = if rng.random_bool(0.75) {
        rng.random_range(max_nodes / 2..=max_nodes)
    } else {
        rng.random_range(0..=max_nodes)
    };
    let mut draft = GraphDraft::new("rand");
    let mut types = Vec::new();
    let mut has_final = false;
    for i in 0..n {
        // F and N are rare; they never take part in templates
        let t = match rng.random_range(0..20) {
            0..=4 => NodeType::H,
            5..=8 => NodeType::T,
            9..=12 => NodeType::E,
            13..=15 => NodeType::J,
            16..=17 => NodeType::C,
            18 if !has_final => {
                has_final = true;
                NodeType::F
            }
            _ => NodeType::N,
        };
        let time = rng.random_range(1..=steps);
        types.push(t);
        draft.nodes.push(RawNode {
            node_id: format!("N{}", i + 1),
            node_type: t.as_str().into(),
            time: Some(time),
            text: format!("node {i}"),
            support: vec![Support::new(time, format!("step {time}."))],
        });
    }
    let density = rng.random_range(0.05..0.3);
    let mut push_edge = |rng: &mut ChaCha8Rng, s: usize, relation: Relation, d: usize| {
        let time = rng.random_range(1..=steps);
        draft.edges.push(RawEdge {
            src: format!("N{}", s + 1),
            dst: format!("N{}", d + 1),
            relation: relation.as_str().into(),
            time: Some(time),
            support: vec![Support::new(time, format!("step {time}."))],
        });
    };
    for s in 0..n {
        for d in 0..n {
            for r in Relation::ALL {
                if allowed(r, types[s], types[d]) && rng.random_bool(density) {
                    push_edge(rng, s, r, d);
                }
            }
        }
    }
    // a few edges for validation to remove
    if n >= 2 {
        for _ in 0..rng.random_range(0..3) {
            let (s, d) = (rng.random_range(0..n), rng.random_range(0..n));
            let r = Relation::ALL[rng.random_range(0..Relation::ALL.len())];
            push_edge(rng, s, r, d);
        }
    }
    validate_graph(&draft, &trace).unwrap().0
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Responses drawn from P = σ(a(θ − b)).
pub struct Simulated {
    pub data: ResponseMatrix,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn simulate_irt(items: usize, models: usize, envs: usize, seed: u64) -> Simulated {
    let mut r = rng(seed);
    let a: Vec<f64> = (0..items).map(|_| r.random_range(0.5..=2.0)).collect();
    let b: Vec<f64> = (0..items).map(|_| r.random_range(-2.0..=2.0)).collect();
    let mut respondents = Vec::new();
    for m in 0..models {
        for e in 0..envs {
            respondents.push((format!("model{m}"), format!("env{e}")));
        }
    }
    let theta: Vec<f64> = (0..respondents.len()).map(|_| r.random_range(-2.0..=2.0)).collect();
    let y = theta
        .iter()
        .map(|&t| {
            a.iter()
                .zip(&b)
                .map(|(&ai, &bi)| {
                    let p = 1.0 / (1.0 + (-ai * (t - bi)).exp());
                    Some(r.random_bool(p))
                })
                .collect()
        })
        .collect();
    let item_list = (0..items)
        .map(|i| Item {
            id: format!("q{i:02}"),
            set: ItemSet::Knowledge,
        })
        .collect();
    Simulated {
        data: ResponseMatrix::new(respondents, item_list, y).unwrap(),
        a,
        b,
        theta,
    }
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for k in i..=j {
            r[order[k]] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Serves `router` on an ephemeral local port from a background thread and
/// returns its base URL.
pub fn spawn_server(router: axum::Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}
