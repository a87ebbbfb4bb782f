//! Stateful retriever with monotone Local -> Bridge -> Global escalation.
//!
//! - **Local** serializes every edge incident to an entity seed, dropping
//!   edges whose label is not a relation seed when relation seeds exist.
//! - **Bridge** finds non-seed nodes within `K` hops of at least two seeds
//!   and adds short paths from each bridge to those seeds.
//! - **Global** runs degree-normalized personalized PageRank from the seeds
//!   and maps the top-scoring nodes back to their provenance chunks.
//!
//! The sufficiency judge is consulted after every executed stage and each
//! stage runs at most once per call to [`retrieve`].

mod evidence;
pub mod ppr;
pub mod traversal;

use serde::{Deserialize, Serialize};

use crate::cost::CostCounters;
use crate::kg::{Corpus, KnowledgeGraph, NodeIx};
use crate::oracles::{slot, OracleError, OracleSuite, Sufficiency};
use crate::seeding::{align_seeds, extract_mentions, AlignConfig, SeedSet, SeedingError};

pub use evidence::{EvidenceBundle, EvidenceChunk, EvidenceTriple, Stage, StageDelta};
pub use ppr::{personalization, ppr_scores, ppr_scores_observed, top_nodes, PprRun};
pub use traversal::{bfs_distances, bridge_paths, find_bridges, khop_set, shortest_paths_to};

#[derive(Debug, thiserror::Error)]
pub enum RetrieverError {
    #[error("seeding: {0}")]
    Seeding(#[from] SeedingError),
    #[error("{stage} stage: {slot} failed: {source}")]
    Oracle {
        stage: &'static str,
        slot: &'static str,
        #[source]
        source: OracleError,
    },
    #[error("stage {requested} cannot run at cursor {cursor:?}")]
    StageOrder { requested: Stage, cursor: StageCursor },
    #[error("personalization needs at least one entity seed")]
    NoSeeds,
    #[error("every seed has degree 0 and dangling fallback is disabled")]
    DegeneratePersonalization,
    #[error("invalid retriever config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrieverConfig {
    /// Hop budget `K` for bridge discovery.
    pub hop_budget: usize,
    /// Restart probability of the PPR walk.
    pub alpha: f64,
    pub top_l: usize,
    pub ppr_epsilon: f64,
    pub ppr_max_iters: usize,
    /// Use uniform restart over seeds when every seed is isolated.
    pub ppr_dangling_fallback: bool,
    pub max_paths_per_pair: usize,
    pub max_triples: usize,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        Self {
            hop_budget: 2,
            alpha: 0.15,
            top_l: 10,
            ppr_epsilon: 1e-8,
            ppr_max_iters: 200,
            ppr_dangling_fallback: true,
            max_paths_per_pair: 2,
            max_triples: 64,
        }
    }
}

impl RetrieverConfig {
    pub fn validate(&self) -> Result<(), RetrieverError> {
        let bad = |m: String| Err(RetrieverError::InvalidConfig(m));
        if self.hop_budget < 2 {
            return bad(format!("hop_budget {} < 2", self.hop_budget));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} not in (0,1)", self.alpha));
        }
        if self.ppr_epsilon.is_nan() || self.ppr_epsilon <= 0.0 {
            return bad(format!("ppr_epsilon {} must be positive", self.ppr_epsilon));
        }
        for (name, v) in [
            ("top_l", self.top_l),
            ("ppr_max_iters", self.ppr_max_iters),
            ("max_paths_per_pair", self.max_paths_per_pair),
            ("max_triples", self.max_triples),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Per-call switches used by ablations and baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrieveOptions {
    /// Keep aligned relation seeds (off = node-only seeding).
    pub relation_seeds: bool,
    /// Allow escalation to the PPR stage (off = graph-only retrieval).
    pub global_stage: bool,
}

impl Default for RetrieveOptions {
    fn default() -> Self {
        Self { relation_seeds: true, global_stage: true }
    }
}

/// Work counters, summed over every retrieval they are passed to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Telemetry {
    pub retrieve_calls: u64,
    pub local_runs: u64,
    pub bridge_runs: u64,
    pub global_runs: u64,
    pub khop_calls: u64,
    pub bfs_expansions: u64,
    pub ppr_runs: u64,
    pub ppr_iterations: u64,
}

impl Telemetry {
    pub fn stage_runs(&self) -> u64 {
        self.local_runs + self.bridge_runs + self.global_runs
    }

    pub fn merge(&mut self, o: &Telemetry) {
        self.retrieve_calls += o.retrieve_calls;
        self.local_runs += o.local_runs;
        self.bridge_runs += o.bridge_runs;
        self.global_runs += o.global_runs;
        self.khop_calls += o.khop_calls;
        self.bfs_expansions += o.bfs_expansions;
        self.ppr_runs += o.ppr_runs;
        self.ppr_iterations += o.ppr_iterations;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum StageCursor {
    NotStarted,
    AfterLocal,
    AfterBridge,
    AfterGlobal,
}

/// `<query, seeds, evidence>` plus the escalation cursor, which only moves forward.
#[derive(Debug, Clone)]
pub struct RetrieverState {
    pub query: String,
    pub seeds: SeedSet,
    pub evidence: EvidenceBundle,
    cursor: StageCursor,
}

impl RetrieverState {
    pub fn new(query: impl Into<String>, seeds: SeedSet) -> Self {
        Self { query: query.into(), seeds, evidence: EvidenceBundle::default(), cursor: StageCursor::NotStarted }
    }

    pub fn cursor(&self) -> StageCursor {
        self.cursor
    }

    fn advance(&mut self, requested: Stage, allowed: &[StageCursor], to: StageCursor) -> Result<(), RetrieverError> {
        if !allowed.contains(&self.cursor) {
            return Err(RetrieverError::StageOrder { requested, cursor: self.cursor });
        }
        self.cursor = to;
        self.evidence.terminated_at = Some(requested);
        self.evidence.sufficient = false;
        Ok(())
    }

    fn push_edge(&mut self, g: &KnowledgeGraph, edge: usize, stage: Stage, cfg: &RetrieverConfig, delta: &mut StageDelta) {
        let e = g.edge(edge);
        let triple = EvidenceTriple {
            source: e.source.clone(),
            relation: e.relation.clone(),
            target: e.target.clone(),
            provenance: e.provenance.iter().cloned().collect(),
            stage,
        };
        self.evidence.push_triple(triple, cfg.max_triples, delta);
    }
}

/// Stage 1: one-hop edges around each entity seed.
pub fn stage1_local(
    state: &mut RetrieverState,
    g: &KnowledgeGraph,
    cfg: &RetrieverConfig,
    tel: &mut Telemetry,
) -> Result<StageDelta, RetrieverError> {
    state.advance(Stage::Local, &[StageCursor::NotStarted], StageCursor::AfterLocal)?;
    tel.local_runs += 1;
    let filter = !state.seeds.relation_seeds.is_empty();
    let mut delta = StageDelta::default();
    for v in state.seeds.nodes() {
        for &edge in g.incident_edges(v) {
            if filter && !state.seeds.has_relation(&g.edge(edge).relation) {
                continue;
            }
            state.push_edge(g, edge, Stage::Local, cfg, &mut delta);
        }
    }
    Ok(delta)
}

/// Stage 2: bridge nodes shared by at least two seeds and the short paths
/// linking them to those seeds.
pub fn stage2_bridge(
    state: &mut RetrieverState,
    g: &KnowledgeGraph,
    cfg: &RetrieverConfig,
    tel: &mut Telemetry,
) -> Result<StageDelta, RetrieverError> {
    state.advance(Stage::Bridge, &[StageCursor::AfterLocal], StageCursor::AfterBridge)?;
    tel.bridge_runs += 1;
    let mut delta = StageDelta::default();
    let seeds = state.seeds.nodes();
    if seeds.len() < 2 {
        return Ok(delta);
    }
    let (bridges, tables) = traversal::find_bridges_with_distances(g, &seeds, cfg.hop_budget, tel);
    for b in bridges {
        for edge in traversal::bridge_paths_with(g, b, &tables, cfg.max_paths_per_pair) {
            state.push_edge(g, edge, Stage::Bridge, cfg, &mut delta);
        }
    }
    Ok(delta)
}

/// Stage 3: PPR from the entity seeds, then provenance map-back of the
/// top-L nodes. Chunks are appended node by node in rank order; within one
/// node they follow chunk-id order.
pub fn stage3_global(
    state: &mut RetrieverState,
    g: &KnowledgeGraph,
    cfg: &RetrieverConfig,
    tel: &mut Telemetry,
) -> Result<StageDelta, RetrieverError> {
    state.advance(
        Stage::Global,
        &[StageCursor::AfterLocal, StageCursor::AfterBridge],
        StageCursor::AfterGlobal,
    )?;
    tel.global_runs += 1;
    let mut delta = StageDelta::default();
    let seeds = state.seeds.nodes();
    if seeds.is_empty() {
        return Ok(delta);
    }
    let run = ppr_scores(g, &seeds, cfg, tel)?;
    for u in top_nodes(&run.scores, cfg.top_l) {
        for chunk in g.map_back_ix(&[u]) {
            state.evidence.push_chunk(&chunk, Stage::Global, &mut delta);
        }
    }
    Ok(delta)
}

/// Seeds plus the evidence gathered for one query.
#[derive(Debug, Clone, Serialize)]
pub struct Retrieval {
    pub seeds: SeedSet,
    pub evidence: EvidenceBundle,
}

fn judge(
    state: &mut RetrieverState,
    stage: Stage,
    g: &KnowledgeGraph,
    corpus: &Corpus,
    oracles: &OracleSuite,
    cost: &mut CostCounters,
) -> Result<bool, RetrieverError> {
    let texts = state.evidence.judge_texts(g, corpus);
    let out = oracles
        .judge
        .judge(&state.query, &texts, stage)
        .map_err(|source| RetrieverError::Oracle { stage: stage.as_str(), slot: slot::JUDGE, source })?;
    cost.record(slot::JUDGE, &out.usage);
    let ok = out.value == Sufficiency::Sufficient;
    state.evidence.sufficient = ok;
    Ok(ok)
}

/// Builds seeds for `query` and escalates through the stages until the judge
/// accepts or the stages run out. At most three stage executions happen.
#[allow(clippy::too_many_arguments)]
pub fn retrieve(
    query: &str,
    g: &KnowledgeGraph,
    corpus: &Corpus,
    oracles: &OracleSuite,
    align: &AlignConfig,
    cfg: &RetrieverConfig,
    opts: RetrieveOptions,
    cost: &mut CostCounters,
    tel: &mut Telemetry,
) -> Result<Retrieval, RetrieverError> {
    cfg.validate()?;
    tel.retrieve_calls += 1;
    let mentions = extract_mentions(query, oracles.extractor.as_ref(), cost)?;
    let mut seeds = align_seeds(&mentions, g, oracles.embedder.as_ref(), align, cost)?;
    if !opts.relation_seeds {
        seeds = seeds.without_relations();
    }
    let mut state = RetrieverState::new(query, seeds);

    stage1_local(&mut state, g, cfg, tel)?;
    let mut done = judge(&mut state, Stage::Local, g, corpus, oracles, cost)?;

    if !done && state.seeds.entity_seeds.len() >= 2 {
        stage2_bridge(&mut state, g, cfg, tel)?;
        done = judge(&mut state, Stage::Bridge, g, corpus, oracles, cost)?;
    }
    if !done && opts.global_stage {
        stage3_global(&mut state, g, cfg, tel)?;
        judge(&mut state, Stage::Global, g, corpus, oracles, cost)?;
    }
    Ok(Retrieval { seeds: state.seeds, evidence: state.evidence })
}

/// Seed node indices, for callers that only hold a [`Retrieval`].
pub fn seed_nodes(r: &Retrieval) -> Vec<NodeIx> {
    r.seeds.nodes()
}
