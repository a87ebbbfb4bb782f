use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::kg::{Corpus, KnowledgeGraph};
use crate::text::relation_surface;

/// Retrieval stage, ordered by escalation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Local,
    Bridge,
    Global,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Local => "local",
            Stage::Bridge => "bridge",
            Stage::Global => "global",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvidenceTriple {
    pub source: String,
    pub relation: String,
    pub target: String,
    pub provenance: Vec<String>,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvidenceChunk {
    pub chunk_id: String,
    pub stage: Stage,
}

/// Items newly added by one stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageDelta {
    pub triples: Vec<EvidenceTriple>,
    pub chunks: Vec<EvidenceChunk>,
}

impl StageDelta {
    pub fn is_empty(&self) -> bool {
        self.triples.is_empty() && self.chunks.is_empty()
    }
}

/// Evidence accumulated across stages, in insertion order.
///
/// Chunks come from two sources: the provenance of every stage-1/2 triple
/// and the map-back of the global stage. Each triple and chunk is kept once,
/// tagged with the first stage that produced it, so the chunk list is
/// ordered by stage and then by insertion.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvidenceBundle {
    pub triples: Vec<EvidenceTriple>,
    pub chunks: Vec<EvidenceChunk>,
    /// Last stage executed; `None` before any stage ran.
    pub terminated_at: Option<Stage>,
    /// Whether the judge accepted the evidence at `terminated_at`.
    pub sufficient: bool,
    #[serde(skip)]
    seen_triples: HashSet<(String, String, String)>,
    #[serde(skip)]
    seen_chunks: HashSet<String>,
}

impl EvidenceBundle {
    pub fn is_empty(&self) -> bool {
        self.triples.is_empty() && self.chunks.is_empty()
    }

    pub fn chunk_ids(&self) -> Vec<String> {
        self.chunks.iter().map(|c| c.chunk_id.clone()).collect()
    }

    pub fn has_chunk(&self, chunk_id: &str) -> bool {
        self.seen_chunks.contains(chunk_id)
    }

    /// Adds a triple and its provenance chunks unless the triple is already
    /// present or `max_triples` is reached. Returns whether it was added.
    pub(crate) fn push_triple(&mut self, triple: EvidenceTriple, max_triples: usize, delta: &mut StageDelta) -> bool {
        if self.triples.len() >= max_triples {
            return false;
        }
        let key = (triple.source.clone(), triple.relation.clone(), triple.target.clone());
        if !self.seen_triples.insert(key) {
            return false;
        }
        for c in &triple.provenance {
            self.push_chunk(c, triple.stage, delta);
        }
        delta.triples.push(triple.clone());
        self.triples.push(triple);
        true
    }

    pub(crate) fn push_chunk(&mut self, chunk_id: &str, stage: Stage, delta: &mut StageDelta) -> bool {
        if !self.seen_chunks.insert(chunk_id.to_string()) {
            return false;
        }
        let c = EvidenceChunk { chunk_id: chunk_id.to_string(), stage };
        delta.chunks.push(c.clone());
        self.chunks.push(c);
        true
    }

    /// Texts shown to the sufficiency judge: one line per triple using entity
    /// names, then the text of every evidence chunk.
    pub fn judge_texts(&self, graph: &KnowledgeGraph, corpus: &Corpus) -> Vec<String> {
        let name = |id: &str| graph.get(id).map_or_else(|| id.to_string(), |n| n.canonical_name.clone());
        let mut out: Vec<String> = self
            .triples
            .iter()
            .map(|t| format!("{} {} {}", name(&t.source), relation_surface(&t.relation), name(&t.target)))
            .collect();
        out.extend(corpus.texts(self.chunks.iter().map(|c| &c.chunk_id)).into_iter().map(str::to_string));
        out
    }
}
