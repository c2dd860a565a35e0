//! Tools for turning LLM-agent conversation traces into validated epistemic
//! graphs, detecting productive reasoning motifs and reasoning breakdowns in
//! those graphs, and computing the evaluation statistics that go with them.
//!
//! | module | capability |
//! |---|---|
//! | [`trace`] | trace data model, canonical JSON, ingestion, message selection |
//! | [`graph`] | epistemic graph vocabulary, edge whitelist, validation, window merge |
//! | [`annotate`] | two-stage LLM annotation against a chat-completion endpoint |
//! | [`motif`] | structural templates for motifs and breakdowns, prevalence tables |
//! | [`stats`] | Pass@k, Pass^k, agreement statistics, log-probability pooling |
//! | [`irt`] | two-parameter logistic IRT fitted by MAP |
//! | [`intervention`] | trace registry, prefix slicing, seeded histories |
//! | [`markers`] | behavioral marker taxonomy and human annotations |
//! | [`store`] | directory-backed persistence |
//! | [`service`] | HTTP API for the review UI |
//! | [`cli`] | command-line front end behind the `epitrace` binary |
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod annotate;
pub mod cli;
pub mod graph;
pub mod intervention;
pub mod irt;
pub mod markers;
pub mod motif;
pub mod service;
pub mod stats;
pub mod store;
pub mod trace;
