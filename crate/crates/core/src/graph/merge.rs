use std::collections::HashMap;

use super::{GraphDraft, GraphError, RawEdge, RawNode};

const UNRESOLVED: &str = "unresolved:";

/// Case-folds and collapses runs of whitespace.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

type NodeKey = (String, Option<usize>, String);

fn node_key(node: &RawNode) -> NodeKey {
    (
        node.node_type.clone(),
        node.earliest(),
        normalize_text(&node.text),
    )
}

fn union_support(into: &mut Vec<super::Support>, from: &[super::Support]) {
    for s in from {
        if !into.contains(s) {
            into.push(s.clone());
        }
    }
}

/// Unifies window fragments into one draft.
///
/// Nodes are duplicates when type, earliest supporting message and
/// normalized text agree; their supports are unioned. Node ids are re-issued
/// as `N1, N2, ...` in time order (ties keep first-seen order). Edge
/// endpoints are remapped through the fragment they came from and edges are
/// deduplicated by (src, dst, relation). An endpoint that names no node of
/// its fragment is kept as `unresolved:<id>` so validation drops it.
pub fn merge_window_annotations(partials: &[GraphDraft]) -> Result<GraphDraft, GraphError> {
    let Some(first) = partials.first() else {
        return Ok(GraphDraft::default());
    };
    if let Some(other) = partials.iter().find(|p| p.trace_id != first.trace_id) {
        return Err(GraphError::MixedTraces(
            first.trace_id.clone(),
            other.trace_id.clone(),
        ));
    }

    let mut merged: Vec<RawNode> = Vec::new();
    let mut by_key: HashMap<NodeKey, usize> = HashMap::new();
    let mut local: HashMap<(usize, String), usize> = HashMap::new();
    for (frag, part) in partials.iter().enumerate() {
        for node in &part.nodes {
            let slot = *by_key.entry(node_key(node)).or_insert_with(|| {
                merged.push(RawNode {
                    support: Vec::new(),
                    ..node.clone()
                });
                merged.len() - 1
            });
            union_support(&mut merged[slot].support, &node.support);
            local.entry((frag, node.node_id.clone())).or_insert(slot);
        }
    }

    let mut order: Vec<usize> = (0..merged.len()).collect();
    order.sort_by_key(|&i| (merged[i].earliest().unwrap_or(usize::MAX), i));
    let mut new_id = vec![String::new(); merged.len()];
    for (rank, &i) in order.iter().enumerate() {
        new_id[i] = format!("N{}", rank + 1);
    }
    let nodes: Vec<RawNode> = order
        .iter()
        .map(|&i| {
            let mut n = merged[i].clone();
            n.node_id = new_id[i].clone();
            n.time = n.earliest();
            n
        })
        .collect();

    let remap = |frag: usize, id: &str| -> String {
        match local.get(&(frag, id.to_string())) {
            Some(&slot) => new_id[slot].clone(),
            None if id.starts_with(UNRESOLVED) => id.to_string(),
            None => format!("{UNRESOLVED}{id}"),
        }
    };
    let mut edges: Vec<RawEdge> = Vec::new();
    let mut edge_slot: HashMap<(String, String, String), usize> = HashMap::new();
    for (frag, part) in partials.iter().enumerate() {
        for edge in &part.edges {
            let src = remap(frag, &edge.src);
            let dst = remap(frag, &edge.dst);
            let key = (src.clone(), dst.clone(), edge.relation.clone());
            match edge_slot.get(&key) {
                Some(&slot) => {
                    let e = &mut edges[slot];
                    union_support(&mut e.support, &edge.support);
                    e.time = e.earliest();
                }
                None => {
                    edge_slot.insert(key, edges.len());
                    let mut e = RawEdge {
                        src,
                        dst,
                        ..edge.clone()
                    };
                    e.time = e.earliest();
                    edges.push(e);
                }
            }
        }
    }

    Ok(GraphDraft {
        trace_id: first.trace_id.clone(),
        nodes,
        edges,
    })
}
