use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::read_jsonl;
use super::KgError;

/// A provenance passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
}

/// Precomputed short summary of one document, used by the coverage gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocSummary {
    pub doc_id: String,
    #[serde(rename = "summary")]
    pub summary_text: String,
}

/// Chunk store plus per-document summaries. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    chunks: BTreeMap<String, Chunk>,
    summaries: Vec<DocSummary>,
}

impl Corpus {
    pub fn from_chunks(chunks: impl IntoIterator<Item = Chunk>) -> Result<Self, KgError> {
        let mut map = BTreeMap::new();
        for chunk in chunks {
            if chunk.text.trim().is_empty() {
                return Err(KgError::Invalid(format!("chunk {:?} has empty text", chunk.chunk_id)));
            }
            if map.contains_key(&chunk.chunk_id) {
                return Err(KgError::DuplicateChunk(chunk.chunk_id));
            }
            map.insert(chunk.chunk_id.clone(), chunk);
        }
        Ok(Self { chunks: map, summaries: Vec::new() })
    }

    /// Attaches document summaries. Every summary must name a document that
    /// has chunks, and each document may carry at most one summary.
    pub fn with_summaries(mut self, summaries: Vec<DocSummary>) -> Result<Self, KgError> {
        let docs = self.doc_ids();
        let mut seen = BTreeSet::new();
        for s in &summaries {
            if !docs.contains(s.doc_id.as_str()) {
                return Err(KgError::UnknownDocument(s.doc_id.clone()));
            }
            if !seen.insert(s.doc_id.as_str()) {
                return Err(KgError::Invalid(format!("duplicate summary for document {:?}", s.doc_id)));
            }
        }
        let missing = docs.len() - seen.len();
        if missing > 0 && !summaries.is_empty() {
            log::warn!("{missing} document(s) have no summary; the gate cannot match them");
        }
        self.summaries = summaries;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn get(&self, chunk_id: &str) -> Option<&Chunk> {
        self.chunks.get(chunk_id)
    }

    pub fn contains(&self, chunk_id: &str) -> bool {
        self.chunks.contains_key(chunk_id)
    }

    /// Chunks in ascending `chunk_id` order.
    pub fn chunks(&self) -> impl Iterator<Item = &Chunk> {
        self.chunks.values()
    }

    pub fn summaries(&self) -> &[DocSummary] {
        &self.summaries
    }

    pub fn doc_ids(&self) -> BTreeSet<&str> {
        self.chunks.values().map(|c| c.doc_id.as_str()).collect()
    }

    /// Texts for the given chunk ids, skipping ids not in the corpus.
    pub fn texts<I, S>(&self, ids: I) -> Vec<&str>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        ids.into_iter()
            .filter_map(|id| self.chunks.get(id.as_ref()).map(|c| c.text.as_str()))
            .collect()
    }
}

/// Loads a chunk file (JSON lines of `{"chunk_id","doc_id","text"}`).
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, KgError> {
    let chunks: Vec<Chunk> = read_jsonl(path.as_ref())?;
    Corpus::from_chunks(chunks)
}

/// Loads a summaries file (JSON lines of `{"doc_id","summary"}`).
pub fn load_summaries(path: impl AsRef<Path>) -> Result<Vec<DocSummary>, KgError> {
    read_jsonl(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        let f = write("");
        assert_eq!(load_corpus(f.path()).unwrap().len(), 0);
    }

    #[test]
    fn two_records_preserve_ids() {
        let f = write(
            "{\"chunk_id\":\"c1\",\"doc_id\":\"d1\",\"text\":\"one\"}\n\
             {\"chunk_id\":\"c2\",\"doc_id\":\"d1\",\"text\":\"two\"}\n",
        );
        let corpus = load_corpus(f.path()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.get("c1").unwrap().text, "one");
        assert_eq!(corpus.get("c2").unwrap().doc_id, "d1");
    }

    #[test]
    fn missing_text_names_line() {
        let f = write(
            "{\"chunk_id\":\"c1\",\"doc_id\":\"d1\",\"text\":\"one\"}\n\
             {\"chunk_id\":\"c2\",\"doc_id\":\"d1\"}\n",
        );
        match load_corpus(f.path()) {
            Err(KgError::Malformed { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("text"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_chunk_rejected() {
        let f = write(
            "{\"chunk_id\":\"c1\",\"doc_id\":\"d1\",\"text\":\"one\"}\n\
             {\"chunk_id\":\"c1\",\"doc_id\":\"d2\",\"text\":\"two\"}\n",
        );
        assert!(matches!(load_corpus(f.path()), Err(KgError::DuplicateChunk(id)) if id == "c1"));
    }

    #[test]
    fn blank_lines_are_skipped() {
        let f = write("\n{\"chunk_id\":\"c1\",\"doc_id\":\"d1\",\"text\":\"one\"}\n\n");
        assert_eq!(load_corpus(f.path()).unwrap().len(), 1);
    }

    #[test]
    fn summaries_must_name_known_documents() {
        let corpus = Corpus::from_chunks(vec![Chunk {
            chunk_id: "c1".into(),
            doc_id: "d1".into(),
            text: "x".into(),
        }])
        .unwrap();
        let bad = vec![DocSummary { doc_id: "d9".into(), summary_text: "s".into() }];
        assert!(matches!(corpus.clone().with_summaries(bad), Err(KgError::UnknownDocument(_))));
        let dup = vec![
            DocSummary { doc_id: "d1".into(), summary_text: "s".into() },
            DocSummary { doc_id: "d1".into(), summary_text: "t".into() },
        ];
        assert!(corpus.with_summaries(dup).is_err());
    }
}
