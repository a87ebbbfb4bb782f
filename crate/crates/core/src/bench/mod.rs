//! Benchmark harness: datasets, QA and evidence metrics, per-stage
//! termination breakdown, cost aggregation, the relation-seed ablation and
//! the graph-degradation sweep.

mod metrics;
mod stress;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{Engine, Outcome, Status};
use crate::kg::{read_jsonl, Corpus, KgError};
use crate::retriever::{RetrieveOptions, Stage};

pub use metrics::{exact_match, mean, nearest_rank, recall_at_k, token_f1};
pub use stress::{format_stress, stress_delete, stress_sweep, text_only_ranking, StressRow, StressSpec, StressTable, TextIndex};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Load(#[from] KgError),
    #[error("{path}: instance {index} ({question:?}): {message}")]
    Instance { path: PathBuf, index: usize, question: String, message: String },
    #[error("recall cutoff k must be positive")]
    InvalidK,
    #[error("invalid stress spec: {0}")]
    InvalidStress(String),
    #[error("oracle: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAInstance {
    pub question: String,
    #[serde(rename = "answers")]
    pub gold_answers: Vec<String>,
    #[serde(default)]
    pub gold_chunks: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

/// Loads a JSON-lines dataset and checks every gold chunk against `corpus`.
pub fn load_dataset(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Vec<QAInstance>, BenchError> {
    let path = path.as_ref();
    let items: Vec<QAInstance> = read_jsonl(path)?;
    for (index, it) in items.iter().enumerate() {
        let fail = |message: String| BenchError::Instance {
            path: path.to_path_buf(),
            index,
            question: it.question.clone(),
            message,
        };
        if it.question.trim().is_empty() {
            return Err(fail("empty question".into()));
        }
        if it.gold_answers.is_empty() {
            return Err(fail("no gold answers".into()));
        }
        if let Some(c) = it.gold_chunks.iter().find(|c| !corpus.contains(c)) {
            return Err(fail(format!("unknown gold chunk {c:?}")));
        }
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchOptions {
    /// Drop relation seeds and keep everything else.
    pub ablate_relation_seeds: bool,
    /// Stop after the bridge stage (graph-only baseline).
    pub disable_global: bool,
}

impl BenchOptions {
    pub fn retrieve_options(&self) -> RetrieveOptions {
        RetrieveOptions { relation_seeds: !self.ablate_relation_seeds, global_stage: !self.disable_global }
    }
}

/// Where an instance ended: the last stage of an answered run, or `Failed`
/// for abstentions and failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Local,
    Bridge,
    Global,
    Failed,
}

impl Termination {
    pub fn of(outcome: &Outcome) -> Self {
        match (outcome.status, outcome.terminated_at) {
            (Status::Answered, Some(Stage::Local)) => Termination::Local,
            (Status::Answered, Some(Stage::Bridge)) => Termination::Bridge,
            (Status::Answered, Some(Stage::Global)) => Termination::Global,
            _ => Termination::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub question: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub termination: Termination,
    pub em: f64,
    pub f1: f64,
    pub recall_at_2: Option<f64>,
    pub recall_at_5: Option<f64>,
    pub latency_ms: f64,
    pub tokens: u64,
    pub oracle_calls: u64,
    pub outcome: Outcome,
}

impl InstanceRecord {
    /// Scores one outcome. Unanswered instances get EM, F1 and recall 0.
    pub fn score(index: usize, inst: &QAInstance, outcome: Outcome) -> Self {
        let answered = outcome.status == Status::Answered;
        let answer = if answered { outcome.answer.clone().unwrap_or_default() } else { String::new() };
        let ranking: Vec<String> = if answered { outcome.evidence.clone().unwrap_or_default() } else { Vec::new() };
        let recall = |k| recall_at_k(&ranking, &inst.gold_chunks, k).expect("k is positive");
        Self {
            index,
            question: inst.question.clone(),
            tag: inst.tag.clone(),
            termination: Termination::of(&outcome),
            em: if answered { exact_match(&answer, &inst.gold_answers) } else { 0.0 },
            f1: if answered { token_f1(&answer, &inst.gold_answers) } else { 0.0 },
            recall_at_2: recall(2),
            recall_at_5: recall(5),
            latency_ms: outcome.cost.wall_time.as_secs_f64() * 1e3,
            tokens: outcome.cost.total_tokens(),
            oracle_calls: outcome.cost.total_calls(),
            outcome,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageFractions {
    pub local: f64,
    pub bridge: f64,
    pub global: f64,
    pub failed: f64,
}

impl StageFractions {
    pub fn sum(&self) -> f64 {
        self.local + self.bridge + self.global + self.failed
    }
}

/// Report-level means. Every field is `None` for an empty dataset; the
/// recall means are `None` when no instance has gold chunks.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregates {
    pub em: Option<f64>,
    pub f1: Option<f64>,
    pub recall_at_2: Option<f64>,
    pub recall_at_5: Option<f64>,
    pub mean_latency_ms: Option<f64>,
    pub p95_latency_ms: Option<f64>,
    pub mean_tokens: Option<f64>,
    pub mean_oracle_calls: Option<f64>,
    pub stage_fractions: Option<StageFractions>,
}

impl Aggregates {
    pub fn from_records(records: &[InstanceRecord]) -> Self {
        if records.is_empty() {
            return Self::default();
        }
        let col = |f: &dyn Fn(&InstanceRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
        let latencies = col(&|r| r.latency_ms);
        let n = records.len() as f64;
        let frac = |t: Termination| records.iter().filter(|r| r.termination == t).count() as f64 / n;
        Self {
            em: mean(&col(&|r| r.em)),
            f1: mean(&col(&|r| r.f1)),
            recall_at_2: mean(&records.iter().filter_map(|r| r.recall_at_2).collect::<Vec<_>>()),
            recall_at_5: mean(&records.iter().filter_map(|r| r.recall_at_5).collect::<Vec<_>>()),
            mean_latency_ms: mean(&latencies),
            p95_latency_ms: nearest_rank(&latencies, 0.95),
            mean_tokens: mean(&col(&|r| r.tokens as f64)),
            mean_oracle_calls: mean(&col(&|r| r.oracle_calls as f64)),
            stage_fractions: Some(StageFractions {
                local: frac(Termination::Local),
                bridge: frac(Termination::Bridge),
                global: frac(Termination::Global),
                failed: frac(Termination::Failed),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub options: BenchOptions,
    /// Implementation name per oracle slot.
    pub oracles: BTreeMap<String, String>,
    pub simulated_timing: bool,
    pub instances: usize,
    pub aggregates: Aggregates,
    pub records: Vec<InstanceRecord>,
}

/// Runs every instance through the controller on the rayon pool and
/// aggregates the results. Records keep dataset order. Per-instance errors
/// are captured in the outcome and never abort the run.
pub fn run_benchmark(dataset: &[QAInstance], engine: &Engine, options: BenchOptions) -> RunReport {
    let opts = options.retrieve_options();
    let records: Vec<InstanceRecord> = dataset
        .par_iter()
        .enumerate()
        .map(|(i, inst)| InstanceRecord::score(i, inst, engine.run_with(&inst.question, opts)))
        .collect();
    RunReport {
        options,
        oracles: engine.oracles.names().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        simulated_timing: engine.simulated_timing(),
        instances: records.len(),
        aggregates: Aggregates::from_records(&records),
        records,
    }
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

/// Human-readable summary of a report's aggregates.
pub fn format_summary(report: &RunReport) -> String {
    let a = &report.aggregates;
    let mut s = String::new();
    let _ = writeln!(s, "{:<18} {:>12}", "metric", "value");
    let rows: [(&str, Option<f64>, usize); 8] = [
        ("em", a.em, 4),
        ("f1", a.f1, 4),
        ("recall@2", a.recall_at_2, 4),
        ("recall@5", a.recall_at_5, 4),
        ("latency_mean_ms", a.mean_latency_ms, 3),
        ("latency_p95_ms", a.p95_latency_ms, 3),
        ("tokens_mean", a.mean_tokens, 1),
        ("oracle_calls_mean", a.mean_oracle_calls, 2),
    ];
    let _ = writeln!(s, "{:<18} {:>12}", "instances", report.instances);
    for (name, v, d) in rows {
        let _ = writeln!(s, "{:<18} {:>12}", name, cell(v, d));
    }
    let f = a.stage_fractions;
    for (name, v) in [
        ("stage_local", f.map(|f| f.local)),
        ("stage_bridge", f.map(|f| f.bridge)),
        ("stage_global", f.map(|f| f.global)),
        ("stage_failed", f.map(|f| f.failed)),
    ] {
        let _ = writeln!(s, "{:<18} {:>12}", name, cell(v, 4));
    }
    s
}
