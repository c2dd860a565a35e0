//! Reference implementations written directly from the template and
//! estimator definitions, sharing no code with the library.

use std::collections::BTreeSet;

use epitrace::graph::{EpistemicGraph, NodeType, Relation};
use epitrace::motif::{MotifHit, MotifId};
use rand::Rng;

use NodeType::*;
use Relation::*;

struct G<'a> {
    g: &'a EpistemicGraph,
}

impl G<'_> {
    fn n(&self) -> usize {
        self.g.nodes.len()
    }
    fn ty(&self, i: usize) -> NodeType {
        self.g.nodes[i].node_type
    }
    fn time(&self, i: usize) -> usize {
        self.g.nodes[i].time
    }
    fn id(&self, i: usize) -> &str {
        &self.g.nodes[i].node_id
    }
    fn edge(&self, s: usize, r: Relation, d: usize) -> bool {
        self.g
            .edges
            .iter()
            .any(|e| e.src == self.id(s) && e.dst == self.id(d) && e.relation == r)
    }
    fn out_count(&self, s: usize, r: Option<Relation>) -> usize {
        self.g
            .edges
            .iter()
            .filter(|e| e.src == self.id(s) && r.is_none_or(|r| e.relation == r))
            .count()
    }
    fn in_count(&self, d: usize, r: Option<Relation>) -> usize {
        self.g
            .edges
            .iter()
            .filter(|e| e.dst == self.id(d) && r.is_none_or(|r| e.relation == r))
            .count()
    }
    fn in_from(&self, d: usize, r: Option<Relation>, from: &[NodeType]) -> bool {
        (0..self.n()).any(|s| {
            from.contains(&self.ty(s))
                && match r {
                    Some(r) => self.edge(s, r, d),
                    None => Relation::ALL.into_iter().any(|r| self.edge(s, r, d)),
                }
        })
    }

    /// Hypotheses sharing an informing J or E with `c`, else the latest H
    /// strictly before it (last in node order on ties).
    fn assoc(&self, c: usize) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        for x in 0..self.n() {
            if !matches!(self.ty(x), J | E) || !self.edge(x, Informs, c) {
                continue;
            }
            for h in 0..self.n() {
                if self.ty(h) == H && self.edge(x, Informs, h) {
                    set.insert(h);
                }
            }
        }
        if set.is_empty() {
            let mut best: Option<usize> = None;
            for h in 0..self.n() {
                if self.ty(h) == H && self.time(h) < self.time(c) {
                    if best.is_none_or(|b| self.time(h) >= self.time(b)) {
                        best = Some(h);
                    }
                }
            }
            set.extend(best);
        }
        set
    }
}

/// Every assignment of nodes to `types.len()` roles whose node types match.
fn assignments(g: &G<'_>, types: &[NodeType]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &t in types {
        let mut next = Vec::new();
        for prefix in &out {
            for i in 0..g.n() {
                if g.ty(i) == t {
                    let mut p = prefix.clone();
                    p.push(i);
                    next.push(p);
                }
            }
        }
        out = next;
    }
    out
}

pub fn detect(graph: &EpistemicGraph) -> BTreeSet<MotifHit> {
    let g = G { g: graph };
    let mut hits = BTreeSet::new();
    let mut push = |m: MotifId, roles: &[(&str, usize)]| {
        hits.insert(MotifHit::new(m, roles.iter().map(|&(r, i)| (r, g.id(i)))));
    };
    let tests_out = |i: usize| g.out_count(i, Some(Tests)) > 0;
    let observes_out = |i: usize| g.out_count(i, Some(Observes)) > 0;

    for a in assignments(&g, &[E, H]) {
        let (e, h) = (a[0], a[1]);
        let path = g.edge(e, Informs, h)
            || (0..g.n()).any(|j| g.ty(j) == J && g.edge(e, Informs, j) && g.edge(j, Informs, h));
        if g.time(e) < g.time(h) && path && tests_out(h) {
            push(MotifId::EvidenceLedHypothesisGeneration, &[("E", e), ("H", h)]);
        }
    }
    for a in assignments(&g, &[H, H]) {
        let (h1, h2) = (a[0], a[1]);
        if g.edge(h1, CompetesWith, h2) && tests_out(h1) && tests_out(h2) {
            push(MotifId::HypothesisReranking, &[("H1", h1), ("H2", h2)]);
        }
    }
    for a in assignments(&g, &[H, T, E, H]) {
        let (h1, t, e, h2) = (a[0], a[1], a[2], a[3]);
        if g.edge(h1, UpdatesTo, h2)
            && g.edge(h1, Tests, t)
            && g.edge(t, Observes, e)
            && g.time(e) <= g.time(h2)
        {
            push(
                MotifId::RefutationDrivenBeliefRevision,
                &[("H1", h1), ("T", t), ("E", e), ("H2", h2)],
            );
        }
    }
    for a in assignments(&g, &[T, H]) {
        let (t1, h) = (a[0], a[1]);
        if !g.in_from(t1, None, &[H, J]) && observes_out(t1) && tests_out(h) && g.time(t1) < g.time(h) {
            push(MotifId::ExploreThenTestTransition, &[("T1", t1), ("H", h)]);
        }
    }
    for a in assignments(&g, &[H, T, T]) {
        let (h, ta, tb) = (a[0], a[1], a[2]);
        if ta != tb
            && g.edge(h, Tests, ta)
            && g.edge(h, Tests, tb)
            && observes_out(ta)
            && observes_out(tb)
        {
            push(MotifId::ConvergentMultiTestEvidence, &[("H", h)]);
        }
    }
    for a in assignments(&g, &[H, T, E, J, T]) {
        let (h, t, e, j, t2) = (a[0], a[1], a[2], a[3], a[4]);
        if g.edge(h, Tests, t)
            && g.edge(t, Observes, e)
            && g.edge(e, Informs, j)
            && g.edge(j, Tests, t2)
            && t2 != t
            && g.out_count(h, Some(UpdatesTo)) == 0
        {
            push(
                MotifId::FixedHypothesisTestTuning,
                &[("H", h), ("T", t), ("E", e), ("J", j), ("T2", t2)],
            );
        }
    }
    for a in assignments(&g, &[J, T]) {
        let (j, t) = (a[0], a[1]);
        if g.edge(j, Tests, t) && observes_out(t) {
            push(MotifId::EvidenceGuidedTestRedesign, &[("J", j), ("T", t)]);
        }
    }
    for a in assignments(&g, &[H]) {
        if !tests_out(a[0]) {
            push(MotifId::UntestedClaim, &[("H", a[0])]);
        }
    }
    for a in assignments(&g, &[C]) {
        let c = a[0];
        let assoc = g.assoc(c);
        if !assoc.is_empty()
            && assoc
                .iter()
                .all(|&h| g.in_count(h, Some(Informs)) > 0 && g.in_count(h, Some(Contradicts)) == 0)
        {
            push(MotifId::OneSidedConfirmation, &[("C", c)]);
        }
    }
    for source in [E, J] {
        for a in assignments(&g, &[source, H]) {
            let (x, h) = (a[0], a[1]);
            let repaired = g.out_count(h, Some(UpdatesTo)) > 0
                || g.out_count(h, Some(CompetesWith)) > 0
                || g.in_count(h, Some(CompetesWith)) > 0;
            if g.edge(x, Contradicts, h) && !repaired {
                let role = if source == E { "E" } else { "J" };
                push(MotifId::ContradictionWithoutRepair, &[(role, x), ("H", h)]);
            }
        }
    }
    for a in assignments(&g, &[C, H]) {
        let (c, h) = (a[0], a[1]);
        if g.assoc(c).contains(&h) && !tests_out(h) {
            push(MotifId::PrematureCommitment, &[("C", c), ("H", h)]);
        }
    }
    for a in assignments(&g, &[E]) {
        let e = a[0];
        let (inn, out) = (g.in_count(e, None), g.out_count(e, None));
        if inn > 0 && out == 0 {
            push(MotifId::EvidenceNonUptake, &[("E", e)]);
        }
        if inn == 0 && out == 0 {
            push(MotifId::DisconnectedEvidence, &[("E", e)]);
        }
    }
    for a in assignments(&g, &[J]) {
        if !g.in_from(a[0], Some(Informs), &[E]) {
            push(MotifId::UnsupportedJudgment, &[("J", a[0])]);
        }
    }
    for a in assignments(&g, &[T]) {
        if !observes_out(a[0]) {
            push(MotifId::UninformativeTest, &[("T", a[0])]);
        }
    }
    let any_h = (0..g.n()).any(|i| g.ty(i) == H);
    if any_h && !graph.edges.iter().any(|e| e.relation == UpdatesTo) {
        push(MotifId::FixedBeliefTrace, &[]);
    }
    for a in assignments(&g, &[C]) {
        let c = a[0];
        let evidence_times: Vec<usize> = (0..g.n()).filter(|&i| g.ty(i) == E).map(|i| g.time(i)).collect();
        if !evidence_times.is_empty() && evidence_times.iter().all(|&t| g.time(c) < t) {
            push(MotifId::PrecommittedTestPlan, &[("C", c)]);
        }
    }
    for a in assignments(&g, &[H]) {
        let h2 = a[0];
        if g.in_count(h2, Some(UpdatesTo)) > 0
            && !tests_out(h2)
            && g.out_count(h2, Some(UpdatesTo)) == 0
        {
            push(MotifId::StalledRevision, &[("H2", h2)]);
        }
    }
    hits
}

/// Monte Carlo estimate of (Pass@k, Pass^k): draws `samples` uniform
/// k-subsets of n trials of which c succeeded.
pub fn subset_mc(n: u64, c: u64, k: u64, samples: u64, rng: &mut impl Rng) -> (f64, f64) {
    let (mut any, mut all) = (0u64, 0u64);
    for _ in 0..samples {
        let (mut succ_left, mut left) = (c, n);
        let mut drawn_succ = 0;
        for _ in 0..k {
            if rng.random_range(0..left) < succ_left {
                succ_left -= 1;
                drawn_succ += 1;
            }
            left -= 1;
        }
        any += (drawn_succ > 0) as u64;
        all += (drawn_succ == k) as u64;
    }
    (any as f64 / samples as f64, all as f64 / samples as f64)
}
