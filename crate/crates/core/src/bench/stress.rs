//! Extraction-loss stress test: delete a random fraction of graph nodes,
//! keep the corpus, and compare evidence recall across strategies.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mean, recall_at_k, run_benchmark, BenchError, BenchOptions, QAInstance};
use crate::controller::Engine;
use crate::kg::{Corpus, KnowledgeGraph, NodeIx};
use crate::oracles::{clipped_cosine, TextEmbedder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressSpec {
    pub deletion_fractions: Vec<f64>,
    pub rng_seed: u64,
}

impl StressSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if let Some(p) = self.deletion_fractions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(BenchError::InvalidStress(format!("fraction {p} not in [0,1]")));
        }
        if self.deletion_fractions.windows(2).any(|w| w[0] > w[1]) {
            return Err(BenchError::InvalidStress("fractions must be sorted ascending".into()));
        }
        Ok(())
    }
}

/// Removes `floor(p * |V|)` nodes sampled without replacement under
/// `rng_seed`, with all their incident edges. Returns the degraded graph and
/// the removed node ids in ascending order.
pub fn stress_delete(g: &KnowledgeGraph, p: f64, rng_seed: u64) -> (KnowledgeGraph, Vec<String>) {
    assert!((0.0..=1.0).contains(&p), "deletion fraction {p} outside [0,1]");
    let n = g.node_count();
    let k = ((p * n as f64).floor() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let removed: BTreeSet<NodeIx> = sample(&mut rng, n, k).into_iter().collect();
    let ids = removed.iter().map(|&ix| g.node(ix).node_id.clone()).collect();
    (g.without_nodes(&removed), ids)
}

/// Dense chunk index for the text-only baseline.
#[derive(Debug, Clone)]
pub struct TextIndex {
    entries: Vec<(String, Vec<f64>)>,
}

impl TextIndex {
    pub fn build(corpus: &Corpus, embedder: &dyn TextEmbedder) -> Result<Self, BenchError> {
        let entries = corpus
            .chunks()
            .map(|c| {
                embedder
                    .embed(&c.text)
                    .map(|m| (c.chunk_id.clone(), m.value))
                    .map_err(|e| BenchError::Oracle(format!("embedding {}: {e}", c.chunk_id)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }

    /// Top `k` chunks by clipped cosine to `query`, ties by chunk id.
    pub fn search(&self, query: &[f64], k: usize) -> Vec<String> {
        let mut scored: Vec<(f64, &str)> =
            self.entries.iter().map(|(id, v)| (clipped_cosine(query, v), id.as_str())).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
    }
}

/// Text-only retrieval: dense top-`k` over the whole corpus, never reading the graph.
pub fn text_only_ranking(
    index: &TextIndex,
    question: &str,
    embedder: &dyn TextEmbedder,
    k: usize,
) -> Result<Vec<String>, BenchError> {
    let q = embedder.embed(question).map_err(|e| BenchError::Oracle(format!("embedding query: {e}")))?;
    Ok(index.search(&q.value, k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressRow {
    pub fraction: f64,
    pub removed_nodes: Vec<String>,
    /// Recall@5 per strategy.
    pub a2rag: Option<f64>,
    pub graph_only: Option<f64>,
    pub text_only: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressTable {
    pub spec: StressSpec,
    pub rows: Vec<StressRow>,
}

/// For every deletion fraction, degrades the graph once and scores the
/// full pipeline, the pipeline without the global stage, and dense
/// text retrieval on the same dataset. `factory` builds an engine over a
/// degraded graph.
pub fn stress_sweep<F>(dataset: &[QAInstance], base: &Engine, factory: F, spec: &StressSpec) -> Result<StressTable, BenchError>
where
    F: Fn(Arc<KnowledgeGraph>) -> Engine,
{
    spec.validate()?;
    let index = TextIndex::build(&base.corpus, base.oracles.embedder.as_ref())?;
    let mut rows = Vec::new();
    for &p in &spec.deletion_fractions {
        let (g, removed_nodes) = stress_delete(&base.graph, p, spec.rng_seed);
        let engine = factory(Arc::new(g));
        let full = run_benchmark(dataset, &engine, BenchOptions::default());
        let graph_only = run_benchmark(dataset, &engine, BenchOptions { disable_global: true, ..Default::default() });
        let mut text = Vec::new();
        for inst in dataset {
            let ranking = text_only_ranking(&index, &inst.question, base.oracles.embedder.as_ref(), 5)?;
            if let Some(r) = recall_at_k(&ranking, &inst.gold_chunks, 5)? {
                text.push(r);
            }
        }
        rows.push(StressRow {
            fraction: p,
            removed_nodes,
            a2rag: full.aggregates.recall_at_5,
            graph_only: graph_only.aggregates.recall_at_5,
            text_only: mean(&text),
        });
    }
    Ok(StressTable { spec: spec.clone(), rows })
}

pub fn format_stress(table: &StressTable) -> String {
    let c = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    let mut s = String::new();
    let _ = writeln!(s, "{:>8} {:>8} {:>10} {:>10} {:>10}", "deleted", "nodes", "a2rag", "graph_only", "text_only");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{:>8.2} {:>8} {:>10} {:>10} {:>10}",
            r.fraction,
            r.removed_nodes.len(),
            c(r.a2rag),
            c(r.graph_only),
            c(r.text_only)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityNode, RelationEdge};

    fn ten() -> KnowledgeGraph {
        let nodes = (0..10).map(|i| EntityNode::new(format!("n{i}"), format!("N{i}"))).collect();
        let edges = (0..9).map(|i| RelationEdge::new(format!("n{i}"), "r", format!("n{}", i + 1))).collect();
        KnowledgeGraph::from_parts(nodes, edges, None).unwrap()
    }

    #[test]
    fn deletion_counts_and_reproducibility() {
        let g = ten();
        let (same, none) = stress_delete(&g, 0.0, 7);
        assert!(none.is_empty());
        assert_eq!(same.to_records(), g.to_records());
        let (empty, all) = stress_delete(&g, 1.0, 7);
        assert_eq!((empty.node_count(), empty.edge_count(), all.len()), (0, 0, 10));
        let (a, ra) = stress_delete(&g, 0.2, 42);
        let (b, rb) = stress_delete(&g, 0.2, 42);
        assert_eq!(ra.len(), 2);
        assert_eq!(ra, rb);
        assert_eq!(a.to_records(), b.to_records());
        assert_eq!(a.node_count(), 8);
    }

    #[test]
    fn spec_validation() {
        assert!(StressSpec { deletion_fractions: vec![0.0, 0.4], rng_seed: 1 }.validate().is_ok());
        assert!(StressSpec { deletion_fractions: vec![0.4, 0.1], rng_seed: 1 }.validate().is_err());
        assert!(StressSpec { deletion_fractions: vec![1.5], rng_seed: 1 }.validate().is_err());
    }
}
