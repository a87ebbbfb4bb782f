//! Query mention extraction and alignment to graph nodes and relation labels.
//!
//! A mention is scored against a candidate by mixing a lexical term (edit
//! similarity) with a semantic term (clipped embedding cosine):
//!
//! ```text
//! score = lambda_lex * lex + (1 - lambda_lex) * sem
//! ```
//!
//! Both terms take the best value over the candidate's surface forms
//! (canonical name and aliases for nodes, the label and its readable form for
//! relations). Only matches scoring at least `tau_align` become seeds.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cost::CostCounters;
use crate::kg::{EntityNode, KnowledgeGraph, NodeIx};
use crate::oracles::{clipped_cosine, slot, MentionExtractor, OracleError, TextEmbedder};
use crate::text::{collapse_whitespace, edit_similarity, relation_surface};

#[derive(Debug, thiserror::Error)]
pub enum SeedingError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("mention is empty")]
    EmptyMention,
    #[error("invalid alignment config: {0}")]
    InvalidConfig(String),
    #[error("{slot} failed: {source}")]
    Oracle {
        slot: &'static str,
        #[source]
        source: OracleError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignConfig {
    pub lambda_lex: f64,
    pub tau_align: f64,
    pub max_seeds: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { lambda_lex: 0.5, tau_align: 0.8, max_seeds: 8 }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), SeedingError> {
        if !(0.0..=1.0).contains(&self.lambda_lex) {
            return Err(SeedingError::InvalidConfig(format!("lambda_lex {} not in [0,1]", self.lambda_lex)));
        }
        if !(self.tau_align > 0.0 && self.tau_align <= 1.0) {
            return Err(SeedingError::InvalidConfig(format!("tau_align {} not in (0,1]", self.tau_align)));
        }
        if self.max_seeds == 0 {
            return Err(SeedingError::InvalidConfig("max_seeds must be positive".into()));
        }
        Ok(())
    }
}

/// Normalized, case-insensitively distinct mentions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MentionSet {
    pub entity_mentions: Vec<String>,
    pub relation_mentions: Vec<String>,
}

impl MentionSet {
    pub fn new<E, R>(entities: E, relations: R) -> Self
    where
        E: IntoIterator,
        E::Item: AsRef<str>,
        R: IntoIterator,
        R::Item: AsRef<str>,
    {
        Self { entity_mentions: dedup_mentions(entities), relation_mentions: dedup_mentions(relations) }
    }

    pub fn is_empty(&self) -> bool {
        self.entity_mentions.is_empty() && self.relation_mentions.is_empty()
    }
}

fn dedup_mentions<I>(items: I) -> Vec<String>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for m in items {
        let m = collapse_whitespace(m.as_ref());
        if !m.is_empty() && seen.insert(m.to_lowercase()) {
            out.push(m);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntitySeed {
    pub node_id: String,
    #[serde(skip)]
    pub node: NodeIx,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationSeed {
    pub label: String,
    pub score: f64,
}

/// Aligned seeds, each list sorted by descending score then id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SeedSet {
    pub entity_seeds: Vec<EntitySeed>,
    pub relation_seeds: Vec<RelationSeed>,
}

impl SeedSet {
    pub fn nodes(&self) -> Vec<NodeIx> {
        self.entity_seeds.iter().map(|s| s.node).collect()
    }

    pub fn has_relation(&self, label: &str) -> bool {
        self.relation_seeds.iter().any(|r| r.label == label)
    }

    /// Drops relation seeds, leaving node-only seeding.
    pub fn without_relations(mut self) -> Self {
        self.relation_seeds.clear();
        self
    }
}

/// Runs the mention extractor and normalizes its output.
pub fn extract_mentions(
    query: &str,
    extractor: &dyn MentionExtractor,
    cost: &mut CostCounters,
) -> Result<MentionSet, SeedingError> {
    if query.trim().is_empty() {
        return Err(SeedingError::EmptyQuery);
    }
    let out = extractor
        .extract(query)
        .map_err(|source| SeedingError::Oracle { slot: slot::EXTRACTOR, source })?;
    cost.record(slot::EXTRACTOR, &out.usage);
    Ok(MentionSet::new(out.value.entities, out.value.relations))
}

/// Memoizes embeddings within one alignment pass.
struct EmbedCache<'a> {
    embedder: &'a dyn TextEmbedder,
    vectors: HashMap<String, Vec<f64>>,
}

impl<'a> EmbedCache<'a> {
    fn new(embedder: &'a dyn TextEmbedder) -> Self {
        Self { embedder, vectors: HashMap::new() }
    }

    fn get(&mut self, text: &str, cost: &mut CostCounters) -> Result<&[f64], SeedingError> {
        if !self.vectors.contains_key(text) {
            let out = self
                .embedder
                .embed(text)
                .map_err(|source| SeedingError::Oracle { slot: slot::EMBEDDER, source })?;
            cost.record(slot::EMBEDDER, &out.usage);
            self.vectors.insert(text.to_string(), out.value);
        }
        Ok(&self.vectors[text])
    }
}

fn best_lex<'s>(mention: &str, forms: impl Iterator<Item = &'s str>) -> f64 {
    forms.map(|f| edit_similarity(mention, f)).fold(0.0, f64::max)
}

fn mix(cfg: &AlignConfig, lex: f64, sem: f64) -> f64 {
    (cfg.lambda_lex * lex + (1.0 - cfg.lambda_lex) * sem).clamp(0.0, 1.0)
}

fn score_forms(
    mention: &str,
    forms: &[String],
    cache: &mut EmbedCache<'_>,
    cfg: &AlignConfig,
    cost: &mut CostCounters,
) -> Result<f64, SeedingError> {
    let lex = best_lex(mention, forms.iter().map(String::as_str));
    let sem = if cfg.lambda_lex < 1.0 {
        let m = cache.get(mention, cost)?.to_vec();
        let mut best: f64 = 0.0;
        for f in forms {
            best = best.max(clipped_cosine(&m, cache.get(f, cost)?));
        }
        best
    } else {
        0.0
    };
    Ok(mix(cfg, lex, sem))
}

/// Hybrid lexical/semantic similarity of `mention` to `node`, in `[0, 1]`.
pub fn hybrid_score(
    mention: &str,
    node: &EntityNode,
    embedder: &dyn TextEmbedder,
    cfg: &AlignConfig,
    cost: &mut CostCounters,
) -> Result<f64, SeedingError> {
    if mention.trim().is_empty() {
        return Err(SeedingError::EmptyMention);
    }
    let forms: Vec<String> = node.surface_forms().map(str::to_string).collect();
    score_forms(mention, &forms, &mut EmbedCache::new(embedder), cfg, cost)
}

/// Aligns every mention to its best node or relation label and keeps the
/// confident ones.
///
/// Candidates whose lexical term alone cannot lift them to `tau_align`, even
/// with a perfect semantic term, are skipped without embedding.
pub fn align_seeds(
    mentions: &MentionSet,
    graph: &KnowledgeGraph,
    embedder: &dyn TextEmbedder,
    cfg: &AlignConfig,
    cost: &mut CostCounters,
) -> Result<SeedSet, SeedingError> {
    cfg.validate()?;
    let mut cache = EmbedCache::new(embedder);
    let reachable = |lex: f64| mix(cfg, lex, 1.0) >= cfg.tau_align;

    let mut entity_best: BTreeMap<NodeIx, f64> = BTreeMap::new();
    for mention in &mentions.entity_mentions {
        let mut best: Option<(f64, NodeIx)> = None;
        for (ix, node) in graph.nodes().iter().enumerate() {
            if !reachable(best_lex(mention, node.surface_forms())) {
                continue;
            }
            let forms: Vec<String> = node.surface_forms().map(str::to_string).collect();
            let s = score_forms(mention, &forms, &mut cache, cfg, cost)?;
            // Nodes are visited in node-id order, so strict > keeps the smallest id on ties.
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, ix));
            }
        }
        if let Some((s, ix)) = best.filter(|(s, _)| *s >= cfg.tau_align) {
            let e = entity_best.entry(ix).or_insert(s);
            *e = e.max(s);
        }
    }

    let mut relation_best: BTreeMap<String, f64> = BTreeMap::new();
    for mention in &mentions.relation_mentions {
        let mut best: Option<(f64, &String)> = None;
        for label in graph.relation_labels() {
            let forms = vec![label.clone(), relation_surface(label)];
            if !reachable(best_lex(mention, forms.iter().map(String::as_str))) {
                continue;
            }
            let s = score_forms(mention, &forms, &mut cache, cfg, cost)?;
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, label));
            }
        }
        if let Some((s, label)) = best.filter(|(s, _)| *s >= cfg.tau_align) {
            let e = relation_best.entry(label.clone()).or_insert(s);
            *e = e.max(s);
        }
    }

    // Cap the combined seed count by score; entities win exact ties.
    #[derive(PartialEq)]
    enum Kind {
        Entity(NodeIx),
        Relation(String),
    }
    let mut all: Vec<(f64, u8, String, Kind)> = entity_best
        .into_iter()
        .map(|(ix, s)| (s, 0, graph.node(ix).node_id.clone(), Kind::Entity(ix)))
        .chain(relation_best.into_iter().map(|(l, s)| (s, 1, l.clone(), Kind::Relation(l))))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
    all.truncate(cfg.max_seeds);

    let mut seeds = SeedSet::default();
    for (score, _, id, kind) in all {
        match kind {
            Kind::Entity(node) => seeds.entity_seeds.push(EntitySeed { node_id: id, node, score }),
            Kind::Relation(label) => seeds.relation_seeds.push(RelationSeed { label, score }),
        }
    }
    Ok(seeds)
}
