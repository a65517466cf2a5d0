//! Job description / resume matching engine.
//!
//! The crate is organised as one module per pipeline concern:
//!
//! * [`corpus`] cleans, labels, deduplicates and splits raw job/resume pairs.
//! * [`ontology`] holds the multilingual skill graph and fuzzy label resolution.
//! * [`textpipe`] tokenizes documents and plans sliding-window chunking under a token-loss budget.
//! * [`embed`] turns chunks into vectors and averages them into document embeddings.
//! * [`matchnet`] is the two-class feed-forward matching head with backpropagation and training.
//! * [`filtering`] extracts hard requirements from job descriptions and removes non-conforming candidates.
//! * [`metrics`] implements TF-IDF, cosine, confusion statistics, ROC-AUC, NDCG, AP and MRR.
//! * [`ranker`] orders candidates per job and evaluates rankings.
//! * [`explain`] computes occlusion attributions and renders stakeholder reports.
//! * [`trace`] is a content-addressed artifact store with an append-only run ledger.
//! * [`pipeline`] wires the modules into replayable stages.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and runs sequentially otherwise.

pub mod corpus;
pub mod embed;
pub mod explain;
pub mod filtering;
pub mod matchnet;
pub mod metrics;
pub mod ontology;
pub mod par;
pub mod pipeline;
pub mod ranker;
pub mod synth;
pub mod textpipe;
pub mod trace;

/// Bilingual (en/fr) mini ontology shipped with the crate.
pub const MINI_ONTOLOGY: &str = include_str!("../fixtures/ontology.tsv");
