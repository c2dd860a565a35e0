//! Productive reasoning motifs and reasoning breakdowns as structural
//! templates over validated epistemic graphs.

mod detect;
mod prevalence;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use detect::{associated_hypotheses, detect, detect_one};
pub use prevalence::{
    prevalence, prevalence_with, GroupKey, PrevalenceError, PrevalenceReport, PrevalenceRow,
    Weighting,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    HypothesisHandling,
    EvidenceHandling,
    InquiryControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Productive,
    Breakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifId {
    // productive
    EvidenceLedHypothesisGeneration,
    HypothesisReranking,
    RefutationDrivenBeliefRevision,
    ExploreThenTestTransition,
    ConvergentMultiTestEvidence,
    FixedHypothesisTestTuning,
    EvidenceGuidedTestRedesign,
    // breakdowns
    UntestedClaim,
    OneSidedConfirmation,
    ContradictionWithoutRepair,
    PrematureCommitment,
    EvidenceNonUptake,
    DisconnectedEvidence,
    UnsupportedJudgment,
    UninformativeTest,
    FixedBeliefTrace,
    PrecommittedTestPlan,
    StalledRevision,
}

impl MotifId {
    pub const ALL: [MotifId; 18] = [
        MotifId::EvidenceLedHypothesisGeneration,
        MotifId::HypothesisReranking,
        MotifId::RefutationDrivenBeliefRevision,
        MotifId::ExploreThenTestTransition,
        MotifId::ConvergentMultiTestEvidence,
        MotifId::FixedHypothesisTestTuning,
        MotifId::EvidenceGuidedTestRedesign,
        MotifId::UntestedClaim,
        MotifId::OneSidedConfirmation,
        MotifId::ContradictionWithoutRepair,
        MotifId::PrematureCommitment,
        MotifId::EvidenceNonUptake,
        MotifId::DisconnectedEvidence,
        MotifId::UnsupportedJudgment,
        MotifId::UninformativeTest,
        MotifId::FixedBeliefTrace,
        MotifId::PrecommittedTestPlan,
        MotifId::StalledRevision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MotifId::EvidenceLedHypothesisGeneration => "evidence_led_hypothesis_generation",
            MotifId::HypothesisReranking => "hypothesis_reranking",
            MotifId::RefutationDrivenBeliefRevision => "refutation_driven_belief_revision",
            MotifId::ExploreThenTestTransition => "explore_then_test_transition",
            MotifId::ConvergentMultiTestEvidence => "convergent_multi_test_evidence",
            MotifId::FixedHypothesisTestTuning => "fixed_hypothesis_test_tuning",
            MotifId::EvidenceGuidedTestRedesign => "evidence_guided_test_redesign",
            MotifId::UntestedClaim => "untested_claim",
            MotifId::OneSidedConfirmation => "one_sided_confirmation",
            MotifId::ContradictionWithoutRepair => "contradiction_without_repair",
            MotifId::PrematureCommitment => "premature_commitment",
            MotifId::EvidenceNonUptake => "evidence_non_uptake",
            MotifId::DisconnectedEvidence => "disconnected_evidence",
            MotifId::UnsupportedJudgment => "unsupported_judgment",
            MotifId::UninformativeTest => "uninformative_test",
            MotifId::FixedBeliefTrace => "fixed_belief_trace",
            MotifId::PrecommittedTestPlan => "precommitted_test_plan",
            MotifId::StalledRevision => "stalled_revision",
        }
    }

    pub fn polarity(self) -> Polarity {
        use MotifId::*;
        match self {
            EvidenceLedHypothesisGeneration
            | HypothesisReranking
            | RefutationDrivenBeliefRevision
            | ExploreThenTestTransition
            | ConvergentMultiTestEvidence
            | FixedHypothesisTestTuning
            | EvidenceGuidedTestRedesign => Polarity::Productive,
            _ => Polarity::Breakdown,
        }
    }

    pub fn family(self) -> Family {
        use MotifId::*;
        match self {
            EvidenceLedHypothesisGeneration
            | HypothesisReranking
            | RefutationDrivenBeliefRevision
            | ExploreThenTestTransition
            | UntestedClaim
            | OneSidedConfirmation
            | ContradictionWithoutRepair
            | PrematureCommitment => Family::HypothesisHandling,
            ConvergentMultiTestEvidence
            | EvidenceNonUptake
            | DisconnectedEvidence
            | UnsupportedJudgment
            | UninformativeTest => Family::EvidenceHandling,
            FixedHypothesisTestTuning
            | EvidenceGuidedTestRedesign
            | FixedBeliefTrace
            | PrecommittedTestPlan
            | StalledRevision => Family::InquiryControl,
        }
    }

    /// One-line description of the template.
    pub fn description(self) -> &'static str {
        use MotifId::*;
        match self {
            EvidenceLedHypothesisGeneration => "evidence precedes and informs a hypothesis that is then tested",
            HypothesisReranking => "two competing hypotheses are each tested",
            RefutationDrivenBeliefRevision => "a tested hypothesis is revised after the evidence comes in",
            ExploreThenTestTransition => "unmotivated exploration precedes a tested hypothesis",
            ConvergentMultiTestEvidence => "one hypothesis is tested by several evidence-producing tests",
            FixedHypothesisTestTuning => "the hypothesis stays fixed while a judgment redesigns the test",
            EvidenceGuidedTestRedesign => "a judgment motivates a test that yields evidence",
            UntestedClaim => "hypothesis with no test",
            OneSidedConfirmation => "commitment whose hypotheses only ever received support",
            ContradictionWithoutRepair => "contradicted hypothesis neither revised nor challenged by an alternative",
            PrematureCommitment => "commitment to a hypothesis that was never tested",
            EvidenceNonUptake => "evidence that is produced but never used",
            DisconnectedEvidence => "evidence with no edges at all",
            UnsupportedJudgment => "judgment not informed by any evidence",
            UninformativeTest => "test that observes no evidence",
            FixedBeliefTrace => "hypotheses present but none is ever revised",
            PrecommittedTestPlan => "commitment made before any evidence exists",
            StalledRevision => "revised hypothesis that is neither tested nor revised further",
        }
    }
}

impl fmt::Display for MotifId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotifId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MotifId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown motif `{s}`"))
    }
}

/// One template instance: template role name to bound node id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MotifHit {
    pub motif: MotifId,
    pub bindings: BTreeMap<String, String>,
}

impl MotifHit {
    pub fn new<'a>(motif: MotifId, roles: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self {
            motif,
            bindings: roles
                .into_iter()
                .map(|(r, n)| (r.to_string(), n.to_string()))
                .collect(),
        }
    }
}

/// Persisted detection result for one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifDocument {
    pub trace_id: String,
    pub hits: Vec<MotifHit>,
}
