use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cost::CostCounters;
use crate::kg::Corpus;
use crate::oracles::{slot, ProposedTriple, TripleProposer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProposalError {
    #[error("source chunk {0} is not part of the verified evidence")]
    SourceOutsideEvidence(String),
    #[error("candidate has an empty {0}")]
    EmptyField(&'static str),
}

/// A triple proposed for insertion, pointing at the evidence chunk it came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub source_chunk: String,
}

impl Candidate {
    /// Fails unless `source_chunk` belongs to `evidence` and every field is non-blank.
    pub fn new(triple: ProposedTriple, source_chunk: &str, evidence: &BTreeSet<&str>) -> Result<Self, ProposalError> {
        if !evidence.contains(source_chunk) {
            return Err(ProposalError::SourceOutsideEvidence(source_chunk.to_string()));
        }
        for (name, v) in [("subject", &triple.subject), ("relation", &triple.relation), ("object", &triple.object)] {
            if v.trim().is_empty() {
                return Err(ProposalError::EmptyField(name));
            }
        }
        Ok(Self {
            subject: triple.subject,
            relation: triple.relation,
            object: triple.object,
            source_chunk: source_chunk.to_string(),
        })
    }
}

/// Candidate triples read from each verified evidence chunk, in evidence
/// order. A proposer failure yields an empty list and a warning.
pub fn propose_kb_updates(
    evidence: &[String],
    corpus: &Corpus,
    proposer: &dyn TripleProposer,
    cost: &mut CostCounters,
) -> Vec<Candidate> {
    let allowed: BTreeSet<&str> = evidence.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for chunk_id in evidence {
        let Some(chunk) = corpus.get(chunk_id) else {
            log::warn!("evidence chunk {chunk_id} missing from corpus; skipped");
            continue;
        };
        let triples = match proposer.propose(&chunk.text) {
            Ok(m) => {
                cost.record(slot::PROPOSER, &m.usage);
                m.value
            }
            Err(e) => {
                log::warn!("triple proposer failed on {chunk_id}: {e}; no proposals returned");
                return Vec::new();
            }
        };
        for t in triples {
            match Candidate::new(t, chunk_id, &allowed) {
                Ok(c) if !out.contains(&c) => out.push(c),
                Ok(_) => {}
                Err(e) => log::warn!("dropping candidate from {chunk_id}: {e}"),
            }
        }
    }
    out
}
