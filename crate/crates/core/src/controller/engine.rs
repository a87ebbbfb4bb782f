use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{gate, oracle_err, rewrite, triple_check, ControllerConfig, FailureType, GateConfig, TimingMode, ValidatorBits};
use crate::cost::CostCounters;
use crate::kg::{Corpus, KnowledgeGraph};
use crate::oracles::{slot, OracleSuite, RewriteRequest};
use crate::retriever::{retrieve, RetrieveOptions, RetrieverConfig, Stage, Telemetry};
use crate::seeding::AlignConfig;

/// Every tunable of the query pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub gate: GateConfig,
    pub controller: ControllerConfig,
    pub retriever: RetrieverConfig,
    pub alignment: AlignConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Answered,
    Abstain,
    Fail,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Answered => "ANSWERED",
            Status::Abstain => "ABSTAIN",
            Status::Fail => "FAIL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub query: String,
    pub answer: Option<String>,
    pub seeds: Vec<String>,
    pub terminated_at: Option<Stage>,
    pub sufficient: bool,
    pub evidence_triples: usize,
    pub evidence_chunks: usize,
    pub bits: ValidatorBits,
    pub failure: Option<FailureType>,
    pub error: Option<String>,
}

impl IterationRecord {
    fn new(iteration: usize, query: &str) -> Self {
        Self {
            iteration,
            query: query.to_string(),
            answer: None,
            seeds: Vec::new(),
            terminated_at: None,
            sufficient: false,
            evidence_triples: 0,
            evidence_chunks: 0,
            bits: ValidatorBits::default(),
            failure: None,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub status: Status,
    pub question: String,
    pub answer: Option<String>,
    /// Chunk ids of the final iteration's evidence, in retrieval order.
    pub evidence: Option<Vec<String>>,
    pub terminated_at: Option<Stage>,
    /// Set when `answer` was produced without retrieval or verification.
    pub unverified: bool,
    pub gate_score: f64,
    pub trace: Vec<IterationRecord>,
    pub cost: CostCounters,
    pub telemetry: Telemetry,
    pub error: Option<String>,
}

impl Outcome {
    fn new(question: &str) -> Self {
        Self {
            status: Status::Fail,
            question: question.to_string(),
            answer: None,
            evidence: None,
            terminated_at: None,
            unverified: false,
            gate_score: 0.0,
            trace: Vec::new(),
            cost: CostCounters::default(),
            telemetry: Telemetry::default(),
            error: None,
        }
    }
}

/// Shared, immutable graph and corpus plus the oracle suite and settings.
/// Cloning is cheap; clones may run queries concurrently.
#[derive(Debug, Clone)]
pub struct Engine {
    pub graph: Arc<KnowledgeGraph>,
    pub corpus: Arc<Corpus>,
    pub oracles: OracleSuite,
    pub config: PipelineConfig,
}

impl Engine {
    pub fn new(graph: Arc<KnowledgeGraph>, corpus: Arc<Corpus>, oracles: OracleSuite, config: PipelineConfig) -> Self {
        Self { graph, corpus, oracles, config }
    }

    /// Same corpus and settings over a different graph.
    pub fn with_graph(&self, graph: Arc<KnowledgeGraph>) -> Self {
        Self { graph, ..self.clone() }
    }

    pub fn simulated_timing(&self) -> bool {
        match self.config.controller.timing {
            TimingMode::Wall => false,
            TimingMode::Simulated => true,
            TimingMode::Auto => self.oracles.is_offline(),
        }
    }

    pub fn run(&self, question: &str) -> Outcome {
        self.run_with(question, RetrieveOptions::default())
    }

    /// Gate, then up to `i_max + 1` rounds of retrieve / generate / verify /
    /// rewrite. Oracle or retrieval errors end the run with `Fail`.
    pub fn run_with(&self, question: &str, opts: RetrieveOptions) -> Outcome {
        let started = Instant::now();
        let mut out = Outcome::new(question);
        if let Err(e) = self.drive(question, opts, &mut out) {
            out.status = Status::Fail;
            out.error = Some(e.to_string());
            if let Some(last) = out.trace.last_mut() {
                last.error = Some(e.to_string());
            }
        }
        out.cost.wall_time = if self.simulated_timing() { out.cost.oracle_time } else { started.elapsed() };
        out
    }

    fn drive(&self, question: &str, opts: RetrieveOptions, out: &mut Outcome) -> Result<(), super::ControllerError> {
        let cfg = &self.config;
        let (g, corpus, oracles) = (self.graph.as_ref(), self.corpus.as_ref(), &self.oracles);
        if question.trim().is_empty() {
            return Err(super::ControllerError::Invalid("question is empty".into()));
        }

        let decision = gate(question, corpus, oracles.embedder.as_ref(), &cfg.gate, &mut out.cost)?;
        out.gate_score = decision.score;
        if !decision.passed {
            out.status = Status::Abstain;
            if cfg.controller.non_retrieval_fallback {
                let a = oracles.generator.generate(question, &[]).map_err(oracle_err(slot::GENERATOR))?;
                out.cost.record(slot::GENERATOR, &a.usage);
                out.answer = Some(a.value);
                out.unverified = true;
            }
            return Ok(());
        }

        let mut q = question.to_string();
        for i in 0..=cfg.controller.i_max {
            out.trace.push(IterationRecord::new(i, &q));
            let r = retrieve(
                &q,
                g,
                corpus,
                oracles,
                &cfg.alignment,
                &cfg.retriever,
                opts,
                &mut out.cost,
                &mut out.telemetry,
            )?;
            let seed_names: Vec<String> =
                r.seeds.entity_seeds.iter().map(|s| g.node(s.node).canonical_name.clone()).collect();
            let chunk_ids = r.evidence.chunk_ids();
            let texts = corpus.texts(&chunk_ids);
            {
                let rec = out.trace.last_mut().expect("pushed above");
                rec.seeds = r.seeds.entity_seeds.iter().map(|s| s.node_id.clone()).collect();
                rec.terminated_at = r.evidence.terminated_at;
                rec.sufficient = r.evidence.sufficient;
                rec.evidence_triples = r.evidence.triples.len();
                rec.evidence_chunks = chunk_ids.len();
            }

            let a = oracles.generator.generate(&q, &texts).map_err(oracle_err(slot::GENERATOR))?;
            out.cost.record(slot::GENERATOR, &a.usage);
            let answer = a.value;

            // Nothing retrieved means nothing can be relevant; the validators are not consulted.
            let check = if texts.is_empty() {
                let bits = ValidatorBits { rel: Some(false), ..Default::default() };
                super::CheckResult { passed: false, failure: Some(FailureType::Rel), bits }
            } else {
                triple_check(&q, &answer, &texts, oracles, &mut out.cost)?
            };
            {
                let rec = out.trace.last_mut().expect("pushed above");
                rec.answer = Some(answer.clone());
                rec.bits = check.bits;
                rec.failure = check.failure;
            }
            out.terminated_at = r.evidence.terminated_at;

            if check.passed {
                out.status = Status::Answered;
                out.answer = Some(answer);
                out.evidence = Some(chunk_ids);
                return Ok(());
            }
            if i == cfg.controller.i_max {
                break;
            }
            let failure = check.failure.expect("failed check names a type");
            let req = RewriteRequest { query: &q, answer: &answer, evidence: &texts, failure, seed_names: &seed_names };
            q = rewrite(&req, oracles.rewriter.as_ref(), &mut out.cost)?;
        }
        out.status = Status::Fail;
        Ok(())
    }
}
