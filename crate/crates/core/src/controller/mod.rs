//! Answer-level control loop.
//!
//! A query first passes a coverage gate over the document summaries. The
//! loop then alternates retrieval, answer generation and the three-way
//! verification, rewriting the query according to the first failed check,
//! for at most `i_max + 1` iterations.

mod engine;
mod proposals;

use serde::{Deserialize, Serialize};

use crate::cost::CostCounters;
use crate::kg::Corpus;
use crate::oracles::{clipped_cosine, slot, OracleError, OracleSuite, QueryRewriter, RewriteRequest, TextEmbedder};
use crate::retriever::RetrieverError;

pub use engine::{Engine, IterationRecord, Outcome, PipelineConfig, Status};
pub use proposals::{propose_kb_updates, Candidate, ProposalError};

/// The first violated check of a failed verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureType {
    /// Evidence is not relevant to the query.
    Rel,
    /// The answer is not supported by the evidence.
    Grd,
    /// The answer does not resolve the query.
    Ans,
}

impl FailureType {
    pub const ALL: [FailureType; 3] = [FailureType::Rel, FailureType::Grd, FailureType::Ans];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureType::Rel => "rel",
            FailureType::Grd => "grd",
            FailureType::Ans => "ans",
        }
    }

    fn slot(self) -> &'static str {
        match self {
            FailureType::Rel => slot::VALIDATOR_REL,
            FailureType::Grd => slot::VALIDATOR_GRD,
            FailureType::Ans => slot::VALIDATOR_ANS,
        }
    }
}

impl std::fmt::Display for FailureType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ControllerError {
    #[error("{slot} failed: {source}")]
    Oracle {
        slot: &'static str,
        #[source]
        source: OracleError,
    },
    #[error("retrieval: {0}")]
    Retrieval(#[from] RetrieverError),
    #[error("invalid controller input: {0}")]
    Invalid(String),
}

fn oracle_err(slot: &'static str) -> impl FnOnce(OracleError) -> ControllerError {
    move |source| ControllerError::Oracle { slot, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub tau_g: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { tau_g: 0.35 }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(0.0..=1.0).contains(&self.tau_g) {
            return Err(ControllerError::Invalid(format!("tau_g {} not in [0,1]", self.tau_g)));
        }
        Ok(())
    }
}

/// How `CostCounters::wall_time` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Elapsed wall-clock time.
    Wall,
    /// Sum of the latencies reported by the oracles.
    Simulated,
    /// `Simulated` when every oracle is in-process, `Wall` otherwise.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Rewrite budget; the loop runs at most `i_max + 1` iterations.
    pub i_max: usize,
    /// Answer gated-out queries without evidence (reported as unverified).
    pub non_retrieval_fallback: bool,
    pub timing: TimingMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self { i_max: 2, non_retrieval_fallback: false, timing: TimingMode::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateDecision {
    pub passed: bool,
    /// Best clipped cosine over the summaries; 0 when there are none.
    pub score: f64,
}

/// Coverage gate: passes when some summary is at least `tau_g` similar to `q`.
pub fn gate(
    q: &str,
    corpus: &Corpus,
    embedder: &dyn TextEmbedder,
    cfg: &GateConfig,
    cost: &mut CostCounters,
) -> Result<GateDecision, ControllerError> {
    cfg.validate()?;
    if corpus.summaries().is_empty() {
        return Ok(GateDecision { passed: false, score: 0.0 });
    }
    let qv = embedder.embed(q).map_err(oracle_err(slot::EMBEDDER))?;
    cost.record(slot::EMBEDDER, &qv.usage);
    let mut best = 0.0f64;
    for s in corpus.summaries() {
        let sv = embedder.embed(&s.summary_text).map_err(oracle_err(slot::EMBEDDER))?;
        cost.record(slot::EMBEDDER, &sv.usage);
        best = best.max(clipped_cosine(&qv.value, &sv.value));
    }
    Ok(GateDecision { passed: best >= cfg.tau_g, score: best })
}

/// Validator outputs; `None` marks a check skipped by short-circuit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ValidatorBits {
    pub rel: Option<bool>,
    pub grd: Option<bool>,
    pub ans: Option<bool>,
}

impl ValidatorBits {
    pub fn all_true(&self) -> bool {
        self.rel == Some(true) && self.grd == Some(true) && self.ans == Some(true)
    }

    fn set(&mut self, t: FailureType, v: bool) {
        match t {
            FailureType::Rel => self.rel = Some(v),
            FailureType::Grd => self.grd = Some(v),
            FailureType::Ans => self.ans = Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub passed: bool,
    pub failure: Option<FailureType>,
    pub bits: ValidatorBits,
}

/// Runs the relevance, grounding and resolution validators in that order,
/// stopping at the first `false`.
pub fn triple_check(
    q: &str,
    a: &str,
    evidence: &[&str],
    oracles: &OracleSuite,
    cost: &mut CostCounters,
) -> Result<CheckResult, ControllerError> {
    if a.trim().is_empty() {
        return Err(ControllerError::Invalid("answer is empty".into()));
    }
    let mut bits = ValidatorBits::default();
    for t in FailureType::ALL {
        let v = match t {
            FailureType::Rel => &oracles.validator_rel,
            FailureType::Grd => &oracles.validator_grd,
            FailureType::Ans => &oracles.validator_ans,
        };
        let out = v.validate(q, a, evidence).map_err(oracle_err(t.slot()))?;
        cost.record(t.slot(), &out.usage);
        bits.set(t, out.value);
        if !out.value {
            return Ok(CheckResult { passed: false, failure: Some(t), bits });
        }
    }
    Ok(CheckResult { passed: true, failure: None, bits })
}

/// Type-conditioned query rewrite. Blank rewrites are rejected.
pub fn rewrite(
    req: &RewriteRequest<'_>,
    rewriter: &dyn QueryRewriter,
    cost: &mut CostCounters,
) -> Result<String, ControllerError> {
    let out = rewriter.rewrite(req).map_err(oracle_err(slot::REWRITER))?;
    cost.record(slot::REWRITER, &out.usage);
    if out.value.trim().is_empty() {
        return Err(ControllerError::Oracle { slot: slot::REWRITER, source: OracleError::EmptyOutput("rewriter") });
    }
    Ok(out.value)
}
