//! Knowledge-graph and corpus storage.
//!
//! Everything here is immutable after load and can be shared across query
//! workers behind an `Arc`.

mod corpus;
mod graph;
mod io;

use std::path::PathBuf;

pub use corpus::{load_corpus, load_summaries, Chunk, Corpus, DocSummary};
pub use graph::{
    graph_from_records, load_graph, save_graph, Arc, Direction, EntityNode, KnowledgeGraph, Neighbor, NodeIx,
    RelationEdge,
};
pub use io::{read_jsonl, write_jsonl, GraphRecord};

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("duplicate chunk id {0:?}")]
    DuplicateChunk(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("{context} references unknown node {node_id:?}")]
    UnknownNode { context: String, node_id: String },
    #[error("{owner} cites chunk {chunk_id:?} which is not in the corpus")]
    UnknownChunk { owner: String, chunk_id: String },
    #[error("summary for unknown document {0:?}")]
    UnknownDocument(String),
    #[error("{0}")]
    Invalid(String),
}
