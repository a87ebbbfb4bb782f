//! Adaptive graph retrieval with answer-level verification.
//!
//! - [`kg`]: immutable knowledge graph, corpus and provenance store.
//! - [`seeding`]: query mentions aligned to graph nodes and relation labels.
//! - [`retriever`]: Local / Bridge / Global escalation with provenance map-back.
//! - [`controller`]: coverage gate, three-way verification and typed rewrites.
//! - [`oracles`]: interfaces for every model-dependent judgment, with mocks.
//! - [`bench`]: metrics, reports, ablation and graph-degradation sweeps.

pub mod bench;
pub mod config;
pub mod controller;
pub mod cost;
pub mod kg;
pub mod oracles;
pub mod retriever;
pub mod seeding;
pub mod text;

pub use config::EngineConfig;
pub use controller::{Engine, Outcome, Status};
pub use kg::{Corpus, KnowledgeGraph};
