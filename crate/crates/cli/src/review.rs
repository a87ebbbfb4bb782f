//! Human review of proposed triples and versioned graph updates.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use a2rag_core::controller::Candidate;
use a2rag_core::kg::{graph_from_records, save_graph, Corpus, GraphRecord, KnowledgeGraph};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    #[default]
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub source_chunk: String,
    pub query: String,
    #[serde(default)]
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl ReviewItem {
    pub fn pending(c: Candidate, query: &str) -> Self {
        Self {
            subject: c.subject,
            relation: c.relation,
            object: c.object,
            source_chunk: c.source_chunk,
            query: query.to_string(),
            decision: Decision::Pending,
            reason: None,
        }
    }

    /// Only `Pending` items can be decided.
    pub fn decide(&mut self, d: Decision, reason: Option<String>) -> Result<()> {
        if self.decision != Decision::Pending {
            bail!("item {} -{}-> {} already {:?}", self.subject, self.relation, self.object, self.decision);
        }
        if d == Decision::Pending {
            bail!("cannot move an item back to pending");
        }
        self.decision = d;
        self.reason = reason;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Interactive,
    ApproveAll,
    RejectAll,
}

/// Decides every pending item. Items citing chunks outside the corpus are
/// rejected without asking. Interactive answers are read one line per item:
/// `y`/`yes` approves, `n`/`no` rejects, anything else asks again.
pub fn review_items(
    items: &mut [ReviewItem],
    corpus: &Corpus,
    mode: Mode,
    input: &mut dyn BufRead,
    prompt: &mut dyn Write,
) -> Result<()> {
    for item in items.iter_mut().filter(|i| i.decision == Decision::Pending) {
        let Some(chunk) = corpus.get(&item.source_chunk) else {
            let reason = format!("source chunk {:?} not in corpus", item.source_chunk);
            item.decide(Decision::Rejected, Some(reason))?;
            continue;
        };
        let d = match mode {
            Mode::ApproveAll => Decision::Approved,
            Mode::RejectAll => Decision::Rejected,
            Mode::Interactive => loop {
                writeln!(prompt, "\n({}, {}, {})", item.subject, item.relation, item.object)?;
                writeln!(prompt, "  source {}: {}", item.source_chunk, chunk.text)?;
                writeln!(prompt, "  from query: {}", item.query)?;
                write!(prompt, "approve? [y/n] ")?;
                prompt.flush()?;
                let mut line = String::new();
                if input.read_line(&mut line)? == 0 {
                    bail!("input ended before every item was decided");
                }
                match line.trim().to_lowercase().as_str() {
                    "y" | "yes" => break Decision::Approved,
                    "n" | "no" => break Decision::Rejected,
                    _ => writeln!(prompt, "please answer y or n")?,
                }
            },
        };
        item.decide(d, None)?;
    }
    Ok(())
}

fn resolve(graph: &KnowledgeGraph, name: &str) -> Option<String> {
    if graph.get(name).is_some() {
        return Some(name.to_string());
    }
    let lower = name.to_lowercase();
    graph
        .nodes()
        .iter()
        .find(|n| n.surface_forms().any(|s| s.to_lowercase() == lower))
        .map(|n| n.node_id.clone())
}

fn slug(name: &str) -> String {
    let s: String = name
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    s.split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

/// The graph with every approved item added. Subjects and objects resolve
/// by node id, then by case-insensitive name or alias; unknown ones become
/// new nodes whose provenance is the source chunk.
pub fn apply_approved(graph: &KnowledgeGraph, corpus: &Corpus, items: &[ReviewItem]) -> Result<KnowledgeGraph> {
    let mut records = graph.to_records();
    let mut new_nodes: Vec<(String, String)> = Vec::new();
    let mut taken: BTreeSet<String> = graph.nodes().iter().map(|n| n.node_id.clone()).collect();
    let mut endpoint = |name: &str, chunk: &str, records: &mut Vec<GraphRecord>| -> String {
        if let Some(id) = resolve(graph, name) {
            return id;
        }
        if let Some((_, id)) = new_nodes.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)) {
            return id.clone();
        }
        let base = match slug(name) {
            s if s.is_empty() => "entity".to_string(),
            s => s,
        };
        let mut id = base.clone();
        let mut k = 2;
        while taken.contains(&id) {
            id = format!("{base}_{k}");
            k += 1;
        }
        taken.insert(id.clone());
        new_nodes.push((name.to_string(), id.clone()));
        records.push(GraphRecord::Node {
            node_id: id.clone(),
            name: name.to_string(),
            aliases: Vec::new(),
            chunks: vec![chunk.to_string()],
        });
        id
    };
    for it in items.iter().filter(|i| i.decision == Decision::Approved) {
        let source = endpoint(&it.subject, &it.source_chunk, &mut records);
        let target = endpoint(&it.object, &it.source_chunk, &mut records);
        records.push(GraphRecord::Edge {
            source,
            relation: it.relation.clone(),
            target,
            chunks: vec![it.source_chunk.clone()],
        });
    }
    graph_from_records(records, Some(corpus)).context("approved triples do not form a valid graph")
}

/// First unused `<stem>.rev<N>.jsonl` next to `graph_path`, N starting at 1.
pub fn next_version_path(graph_path: &Path) -> PathBuf {
    let dir = graph_path.parent().unwrap_or_else(|| Path::new("."));
    let stem = graph_path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
    let stem = match stem.rsplit_once(".rev") {
        Some((base, n)) if n.chars().all(|c| c.is_ascii_digit()) && !n.is_empty() => base,
        _ => stem,
    };
    (1..)
        .map(|n| dir.join(format!("{stem}.rev{n}.jsonl")))
        .find(|p| !p.exists())
        .expect("some version number is free")
}

pub fn write_version(graph_path: &Path, graph: &KnowledgeGraph) -> Result<PathBuf> {
    let out = next_version_path(graph_path);
    save_graph(&out, graph).with_context(|| format!("writing {}", out.display()))?;
    Ok(out)
}
