//! Interfaces for every model-dependent judgment in the pipeline.
//!
//! Each slot has a deterministic in-process implementation in [`mock`] and a
//! JSON-over-HTTP implementation in [`remote`]. Every call returns a
//! [`Metered`] value carrying token usage so that callers can attribute cost
//! to the slot that produced it.

pub mod mock;
pub mod remote;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::controller::FailureType;
use crate::retriever::Stage;

/// Token and latency usage reported by one oracle call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Time spent inside the call. Mocks report a synthetic value.
    pub latency: Duration,
}

impl Usage {
    pub fn add(&mut self, other: &Usage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.latency += other.latency;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metered<T> {
    pub value: T,
    pub usage: Usage,
}

impl<T> Metered<T> {
    pub fn new(value: T, usage: Usage) -> Self {
        Self { value, usage }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle configuration: {0}")]
    Config(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("empty output from {0}")]
    EmptyOutput(&'static str),
    #[error("{0}")]
    Failed(String),
}

impl OracleError {
    /// Transport faults, rate limits and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            OracleError::Transport(_) => true,
            OracleError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub type OracleResult<T> = Result<Metered<T>, OracleError>;

/// Outcome of a stage-wise evidence sufficiency check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sufficiency {
    Sufficient,
    Escalate,
}

/// Entity and relation mentions found in a query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mentions {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
}

/// A candidate triple extracted from one evidence chunk.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProposedTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

/// Inputs to a query rewrite after a failed verification.
#[derive(Debug, Clone, Copy)]
pub struct RewriteRequest<'a> {
    pub query: &'a str,
    pub answer: &'a str,
    pub evidence: &'a [&'a str],
    pub failure: FailureType,
    /// Canonical names of the entity seeds aligned for `query`.
    pub seed_names: &'a [String],
}

/// String to unit-norm vector.
pub trait TextEmbedder: Send + Sync {
    fn name(&self) -> &str;
    fn embed(&self, text: &str) -> OracleResult<Vec<f64>>;
}

pub trait AnswerGenerator: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, query: &str, evidence: &[&str]) -> OracleResult<String>;
}

/// One of the three answer-level checks. Implementations see all three
/// inputs but each check only reads the ones its predicate needs.
pub trait BinaryValidator: Send + Sync {
    fn name(&self) -> &str;
    fn validate(&self, query: &str, answer: &str, evidence: &[&str]) -> OracleResult<bool>;
}

pub trait SufficiencyJudge: Send + Sync {
    fn name(&self) -> &str;
    fn judge(&self, query: &str, evidence: &[String], stage: Stage) -> OracleResult<Sufficiency>;
}

pub trait QueryRewriter: Send + Sync {
    fn name(&self) -> &str;
    fn rewrite(&self, request: &RewriteRequest<'_>) -> OracleResult<String>;
}

pub trait MentionExtractor: Send + Sync {
    fn name(&self) -> &str;
    fn extract(&self, query: &str) -> OracleResult<Mentions>;
}

/// Reads a verified chunk and proposes triples for human review.
pub trait TripleProposer: Send + Sync {
    fn name(&self) -> &str;
    fn propose(&self, chunk_text: &str) -> OracleResult<Vec<ProposedTriple>>;
}

/// Slot names used as cost-counter keys.
pub mod slot {
    pub const EMBEDDER: &str = "embedder";
    pub const GENERATOR: &str = "generator";
    pub const VALIDATOR_REL: &str = "validator_rel";
    pub const VALIDATOR_GRD: &str = "validator_grd";
    pub const VALIDATOR_ANS: &str = "validator_ans";
    pub const JUDGE: &str = "judge";
    pub const REWRITER: &str = "rewriter";
    pub const EXTRACTOR: &str = "extractor";
    pub const PROPOSER: &str = "proposer";
}

/// One implementation per slot. Cheap to clone.
#[derive(Clone)]
pub struct OracleSuite {
    pub embedder: Arc<dyn TextEmbedder>,
    pub generator: Arc<dyn AnswerGenerator>,
    pub validator_rel: Arc<dyn BinaryValidator>,
    pub validator_grd: Arc<dyn BinaryValidator>,
    pub validator_ans: Arc<dyn BinaryValidator>,
    pub judge: Arc<dyn SufficiencyJudge>,
    pub rewriter: Arc<dyn QueryRewriter>,
    pub extractor: Arc<dyn MentionExtractor>,
    pub proposer: Arc<dyn TripleProposer>,
}

impl OracleSuite {
    /// `(slot, implementation name)` for every slot.
    pub fn names(&self) -> Vec<(&'static str, String)> {
        vec![
            (slot::EMBEDDER, self.embedder.name().to_string()),
            (slot::GENERATOR, self.generator.name().to_string()),
            (slot::VALIDATOR_REL, self.validator_rel.name().to_string()),
            (slot::VALIDATOR_GRD, self.validator_grd.name().to_string()),
            (slot::VALIDATOR_ANS, self.validator_ans.name().to_string()),
            (slot::JUDGE, self.judge.name().to_string()),
            (slot::REWRITER, self.rewriter.name().to_string()),
            (slot::EXTRACTOR, self.extractor.name().to_string()),
            (slot::PROPOSER, self.proposer.name().to_string()),
        ]
    }

    /// True when no slot talks to a remote service.
    pub fn is_offline(&self) -> bool {
        self.names().iter().all(|(_, name)| !name.starts_with(remote::NAME_PREFIX))
    }
}

impl fmt::Debug for OracleSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.names()).finish()
    }
}

/// Cosine of two vectors clipped to `[0, 1]`. Mismatched or zero vectors score 0.
pub fn clipped_cosine(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() || a.is_empty() {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}
