use std::collections::{BTreeSet, HashMap};

use super::{MotifHit, MotifId};
use crate::graph::{EpiNode, EpistemicGraph, NodeType, Relation};

/// Adjacency view of a graph; node positions index into `graph.nodes`.
struct Index<'g> {
    graph: &'g EpistemicGraph,
    out: Vec<Vec<(Relation, usize)>>,
    inc: Vec<Vec<(Relation, usize)>>,
}

impl<'g> Index<'g> {
    fn new(graph: &'g EpistemicGraph) -> Self {
        let pos: HashMap<&str, usize> = graph
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.node_id.as_str(), i))
            .collect();
        let mut out = vec![Vec::new(); graph.nodes.len()];
        let mut inc = vec![Vec::new(); graph.nodes.len()];
        for e in &graph.edges {
            if let (Some(&s), Some(&d)) = (pos.get(e.src.as_str()), pos.get(e.dst.as_str())) {
                out[s].push((e.relation, d));
                inc[d].push((e.relation, s));
            }
        }
        Self { graph, out, inc }
    }

    fn node(&self, i: usize) -> &'g EpiNode {
        &self.graph.nodes[i]
    }

    fn id(&self, i: usize) -> &'g str {
        &self.graph.nodes[i].node_id
    }

    fn of_type(&self, t: NodeType) -> impl Iterator<Item = usize> + '_ {
        (0..self.graph.nodes.len()).filter(move |&i| self.graph.nodes[i].node_type == t)
    }

    fn is(&self, i: usize, t: NodeType) -> bool {
        self.graph.nodes[i].node_type == t
    }

    fn out_via(&self, i: usize, rel: Relation) -> impl Iterator<Item = usize> + '_ {
        self.out[i]
            .iter()
            .filter(move |(r, _)| *r == rel)
            .map(|&(_, d)| d)
    }

    fn in_via(&self, i: usize, rel: Relation) -> impl Iterator<Item = usize> + '_ {
        self.inc[i]
            .iter()
            .filter(move |(r, _)| *r == rel)
            .map(|&(_, s)| s)
    }

    fn has_out(&self, i: usize, rel: Relation) -> bool {
        self.out_via(i, rel).next().is_some()
    }

    fn has_in(&self, i: usize, rel: Relation) -> bool {
        self.in_via(i, rel).next().is_some()
    }

    fn has_edge(&self, s: usize, rel: Relation, d: usize) -> bool {
        self.out[s].contains(&(rel, d))
    }
}

/// All hits of every template. A motif is present in a trace iff it has at
/// least one hit.
pub fn detect(graph: &EpistemicGraph) -> BTreeSet<MotifHit> {
    let idx = Index::new(graph);
    MotifId::ALL
        .into_iter()
        .flat_map(|m| hits(&idx, m))
        .collect()
}

pub fn detect_one(graph: &EpistemicGraph, motif: MotifId) -> Vec<MotifHit> {
    let idx = Index::new(graph);
    let set: BTreeSet<MotifHit> = hits(&idx, motif).into_iter().collect();
    set.into_iter().collect()
}

/// Hypotheses a commitment is taken to be committed to: those sharing an
/// informing judgment or evidence node with it, or failing that the latest
/// hypothesis before it.
pub fn associated_hypotheses<'g>(graph: &'g EpistemicGraph, commitment: &str) -> Vec<&'g str> {
    let idx = Index::new(graph);
    match graph.nodes.iter().position(|n| n.node_id == commitment) {
        Some(c) => associated(&idx, c).into_iter().map(|h| idx.id(h)).collect(),
        None => Vec::new(),
    }
}

fn associated(idx: &Index<'_>, c: usize) -> BTreeSet<usize> {
    let shared: BTreeSet<usize> = idx
        .in_via(c, Relation::Informs)
        .filter(|&s| idx.is(s, NodeType::J) || idx.is(s, NodeType::E))
        .flat_map(|s| idx.out_via(s, Relation::Informs))
        .filter(|&h| idx.is(h, NodeType::H))
        .collect();
    if !shared.is_empty() {
        return shared;
    }
    let t_c = idx.node(c).time;
    idx.of_type(NodeType::H)
        .filter(|&h| idx.node(h).time < t_c)
        .max_by_key(|&h| (idx.node(h).time, h))
        .into_iter()
        .collect()
}

fn hits(idx: &Index<'_>, motif: MotifId) -> Vec<MotifHit> {
    use NodeType::*;
    use Relation::*;
    let id = |i: usize| idx.id(i);
    let time = |i: usize| idx.node(i).time;
    let mut out = Vec::new();
    match motif {
        MotifId::EvidenceLedHypothesisGeneration => {
            for e in idx.of_type(E) {
                for h in idx.of_type(H) {
                    if time(e) >= time(h) || !idx.has_out(h, Tests) {
                        continue;
                    }
                    let direct = idx.has_edge(e, Informs, h);
                    let via_judgment = idx
                        .out_via(e, Informs)
                        .any(|j| idx.is(j, J) && idx.has_edge(j, Informs, h));
                    if direct || via_judgment {
                        out.push(MotifHit::new(motif, [("E", id(e)), ("H", id(h))]));
                    }
                }
            }
        }
        MotifId::HypothesisReranking => {
            for h1 in idx.of_type(H) {
                for h2 in idx.out_via(h1, CompetesWith).filter(|&h| idx.is(h, H)) {
                    if idx.has_out(h1, Tests) && idx.has_out(h2, Tests) {
                        out.push(MotifHit::new(motif, [("H1", id(h1)), ("H2", id(h2))]));
                    }
                }
            }
        }
        MotifId::RefutationDrivenBeliefRevision => {
            for h1 in idx.of_type(H) {
                for h2 in idx.out_via(h1, UpdatesTo).filter(|&h| idx.is(h, H)) {
                    for t in idx.out_via(h1, Tests).filter(|&t| idx.is(t, T)) {
                        for e in idx.out_via(t, Observes).filter(|&e| idx.is(e, E)) {
                            if time(e) <= time(h2) {
                                out.push(MotifHit::new(
                                    motif,
                                    [("H1", id(h1)), ("T", id(t)), ("E", id(e)), ("H2", id(h2))],
                                ));
                            }
                        }
                    }
                }
            }
        }
        MotifId::ExploreThenTestTransition => {
            let exploratory = idx.of_type(T).filter(|&t| {
                idx.has_out(t, Observes)
                    && !idx.inc[t]
                        .iter()
                        .any(|&(_, s)| idx.is(s, H) || idx.is(s, J))
            });
            for t1 in exploratory {
                for h in idx.of_type(H) {
                    if idx.has_out(h, Tests) && time(t1) < time(h) {
                        out.push(MotifHit::new(motif, [("T1", id(t1)), ("H", id(h))]));
                    }
                }
            }
        }
        MotifId::ConvergentMultiTestEvidence => {
            for h in idx.of_type(H) {
                let productive_tests: BTreeSet<usize> = idx
                    .out_via(h, Tests)
                    .filter(|&t| idx.is(t, T) && idx.has_out(t, Observes))
                    .collect();
                if productive_tests.len() >= 2 {
                    out.push(MotifHit::new(motif, [("H", id(h))]));
                }
            }
        }
        MotifId::FixedHypothesisTestTuning => {
            for h in idx.of_type(H).filter(|&h| !idx.has_out(h, UpdatesTo)) {
                for t in idx.out_via(h, Tests).filter(|&t| idx.is(t, T)) {
                    for e in idx.out_via(t, Observes).filter(|&e| idx.is(e, E)) {
                        for j in idx.out_via(e, Informs).filter(|&j| idx.is(j, J)) {
                            for t2 in idx.out_via(j, Tests).filter(|&x| idx.is(x, T) && x != t) {
                                out.push(MotifHit::new(
                                    motif,
                                    [
                                        ("H", id(h)),
                                        ("T", id(t)),
                                        ("E", id(e)),
                                        ("J", id(j)),
                                        ("T2", id(t2)),
                                    ],
                                ));
                            }
                        }
                    }
                }
            }
        }
        MotifId::EvidenceGuidedTestRedesign => {
            for j in idx.of_type(J) {
                for t in idx.out_via(j, Tests).filter(|&t| idx.is(t, T)) {
                    if idx.has_out(t, Observes) {
                        out.push(MotifHit::new(motif, [("J", id(j)), ("T", id(t))]));
                    }
                }
            }
        }
        MotifId::UntestedClaim => {
            for h in idx.of_type(H).filter(|&h| !idx.has_out(h, Tests)) {
                out.push(MotifHit::new(motif, [("H", id(h))]));
            }
        }
        MotifId::OneSidedConfirmation => {
            for c in idx.of_type(C) {
                let assoc = associated(idx, c);
                let one_sided = !assoc.is_empty()
                    && assoc
                        .iter()
                        .all(|&h| idx.has_in(h, Informs) && !idx.has_in(h, Contradicts));
                if one_sided {
                    out.push(MotifHit::new(motif, [("C", id(c))]));
                }
            }
        }
        MotifId::ContradictionWithoutRepair => {
            for h in idx.of_type(H) {
                let repaired = idx.has_out(h, UpdatesTo)
                    || idx.has_out(h, CompetesWith)
                    || idx.has_in(h, CompetesWith);
                if repaired {
                    continue;
                }
                for x in idx.in_via(h, Contradicts) {
                    let role = if idx.is(x, E) { "E" } else { "J" };
                    if idx.is(x, E) || idx.is(x, J) {
                        out.push(MotifHit::new(motif, [(role, id(x)), ("H", id(h))]));
                    }
                }
            }
        }
        MotifId::PrematureCommitment => {
            for c in idx.of_type(C) {
                for h in associated(idx, c) {
                    if !idx.has_out(h, Tests) {
                        out.push(MotifHit::new(motif, [("C", id(c)), ("H", id(h))]));
                    }
                }
            }
        }
        MotifId::EvidenceNonUptake => {
            for e in idx.of_type(E) {
                if !idx.inc[e].is_empty() && idx.out[e].is_empty() {
                    out.push(MotifHit::new(motif, [("E", id(e))]));
                }
            }
        }
        MotifId::DisconnectedEvidence => {
            for e in idx.of_type(E) {
                if idx.inc[e].is_empty() && idx.out[e].is_empty() {
                    out.push(MotifHit::new(motif, [("E", id(e))]));
                }
            }
        }
        MotifId::UnsupportedJudgment => {
            for j in idx.of_type(J) {
                if !idx.in_via(j, Informs).any(|s| idx.is(s, E)) {
                    out.push(MotifHit::new(motif, [("J", id(j))]));
                }
            }
        }
        MotifId::UninformativeTest => {
            for t in idx.of_type(T).filter(|&t| !idx.has_out(t, Observes)) {
                out.push(MotifHit::new(motif, [("T", id(t))]));
            }
        }
        MotifId::FixedBeliefTrace => {
            let any_hypothesis = idx.of_type(H).next().is_some();
            let any_update = idx.graph.edges.iter().any(|e| e.relation == UpdatesTo);
            if any_hypothesis && !any_update {
                out.push(MotifHit::new(motif, []));
            }
        }
        MotifId::PrecommittedTestPlan => {
            if let Some(first_evidence) = idx.of_type(E).map(time).min() {
                for c in idx.of_type(C).filter(|&c| time(c) < first_evidence) {
                    out.push(MotifHit::new(motif, [("C", id(c))]));
                }
            }
        }
        MotifId::StalledRevision => {
            for h2 in idx.of_type(H) {
                if idx.has_in(h2, UpdatesTo) && !idx.has_out(h2, Tests) && !idx.has_out(h2, UpdatesTo)
                {
                    out.push(MotifHit::new(motif, [("H2", id(h2))]));
                }
            }
        }
    }
    out
}
