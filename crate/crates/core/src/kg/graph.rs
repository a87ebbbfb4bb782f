use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use super::corpus::Corpus;
use super::io::{read_jsonl, write_jsonl, GraphRecord};
use super::KgError;

/// Dense node index, ordered the same way as `node_id`.
pub type NodeIx = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityNode {
    pub node_id: String,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    /// Chunk ids this entity was extracted from, sorted and distinct.
    pub provenance: BTreeSet<String>,
}

impl EntityNode {
    pub fn new(node_id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            node_id: node_id.into(),
            canonical_name: name.into(),
            aliases: Vec::new(),
            provenance: BTreeSet::new(),
        }
    }

    pub fn with_aliases<I: IntoIterator<Item = S>, S: Into<String>>(mut self, aliases: I) -> Self {
        self.aliases = aliases.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_provenance<I: IntoIterator<Item = S>, S: Into<String>>(mut self, chunks: I) -> Self {
        self.provenance = chunks.into_iter().map(Into::into).collect();
        self
    }

    /// Canonical name followed by aliases.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RelationEdge {
    pub source: String,
    pub relation: String,
    pub target: String,
    pub provenance: BTreeSet<String>,
}

impl RelationEdge {
    pub fn new(source: impl Into<String>, relation: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            relation: relation.into(),
            target: target.into(),
            provenance: BTreeSet::new(),
        }
    }

    pub fn with_provenance<I: IntoIterator<Item = S>, S: Into<String>>(mut self, chunks: I) -> Self {
        self.provenance = chunks.into_iter().map(Into::into).collect();
        self
    }

    fn key(&self) -> (&str, &str, &str) {
        (&self.source, &self.relation, &self.target)
    }
}

/// Whether an augmented arc follows the stored edge or runs against it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

/// One arc leaving a node in the inverse-augmented view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub edge: usize,
    pub to: NodeIx,
    pub direction: Direction,
}

/// Public form of an augmented arc, keyed by ids instead of indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Neighbor {
    pub relation: String,
    pub node_id: String,
    pub direction: Direction,
}

/// Entity/relation graph. Immutable after construction.
///
/// Nodes are stored sorted by `node_id`, so a [`NodeIx`] comparison is a node-id
/// comparison. Edges are sorted by `(source, relation, target)` with exact
/// duplicates merged. The inverse-augmented view is not materialized: each
/// non-self-loop edge is listed once in the incidence list of both endpoints
/// and read as a forward arc from the source and an inverse arc from the target.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    nodes: Vec<EntityNode>,
    index: HashMap<String, NodeIx>,
    edges: Vec<RelationEdge>,
    endpoints: Vec<(NodeIx, NodeIx)>,
    /// Incident edge indices per node, ordered by (other endpoint, edge index).
    adjacency: Vec<Vec<usize>>,
    relations: BTreeSet<String>,
}

impl KnowledgeGraph {
    /// Builds a graph, validating references. When `corpus` is given every
    /// provenance chunk id must resolve in it.
    pub fn from_parts(
        nodes: Vec<EntityNode>,
        edges: Vec<RelationEdge>,
        corpus: Option<&Corpus>,
    ) -> Result<Self, KgError> {
        let mut nodes = nodes;
        nodes.sort_by(|a, b| a.node_id.cmp(&b.node_id));
        for pair in nodes.windows(2) {
            if pair[0].node_id == pair[1].node_id {
                return Err(KgError::DuplicateNode(pair[0].node_id.clone()));
            }
        }
        let index: HashMap<String, NodeIx> =
            nodes.iter().enumerate().map(|(i, n)| (n.node_id.clone(), i)).collect();

        if let Some(corpus) = corpus {
            for n in &nodes {
                for c in &n.provenance {
                    if !corpus.contains(c) {
                        return Err(KgError::UnknownChunk { owner: format!("node {}", n.node_id), chunk_id: c.clone() });
                    }
                }
            }
        }

        // Collapse duplicate triples, merging their provenance.
        let mut merged: BTreeMap<(String, String, String), BTreeSet<String>> = BTreeMap::new();
        for e in edges {
            for end in [&e.source, &e.target] {
                if !index.contains_key(end) {
                    return Err(KgError::UnknownNode {
                        context: format!("edge ({}, {}, {})", e.source, e.relation, e.target),
                        node_id: end.clone(),
                    });
                }
            }
            if let Some(corpus) = corpus {
                for c in &e.provenance {
                    if !corpus.contains(c) {
                        return Err(KgError::UnknownChunk {
                            owner: format!("edge ({}, {}, {})", e.source, e.relation, e.target),
                            chunk_id: c.clone(),
                        });
                    }
                }
            }
            merged.entry((e.source, e.relation, e.target)).or_default().extend(e.provenance);
        }
        let edges: Vec<RelationEdge> = merged
            .into_iter()
            .map(|((source, relation, target), provenance)| RelationEdge { source, relation, target, provenance })
            .collect();

        let endpoints: Vec<(NodeIx, NodeIx)> =
            edges.iter().map(|e| (index[&e.source], index[&e.target])).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (ei, &(s, t)) in endpoints.iter().enumerate() {
            if s == t {
                continue;
            }
            adjacency[s].push(ei);
            adjacency[t].push(ei);
        }
        for (u, list) in adjacency.iter_mut().enumerate() {
            list.sort_by_key(|&ei| {
                let (s, t) = endpoints[ei];
                (if s == u { t } else { s }, ei)
            });
        }
        let relations = edges.iter().map(|e| e.relation.clone()).collect();

        Ok(Self { nodes, index, edges, endpoints, adjacency, relations })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[EntityNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RelationEdge] {
        &self.edges
    }

    pub fn node(&self, ix: NodeIx) -> &EntityNode {
        &self.nodes[ix]
    }

    pub fn edge(&self, ei: usize) -> &RelationEdge {
        &self.edges[ei]
    }

    pub fn edge_endpoints(&self, ei: usize) -> (NodeIx, NodeIx) {
        self.endpoints[ei]
    }

    pub fn index_of(&self, node_id: &str) -> Option<NodeIx> {
        self.index.get(node_id).copied()
    }

    pub fn require(&self, node_id: &str) -> Result<NodeIx, KgError> {
        self.index_of(node_id).ok_or_else(|| KgError::UnknownNode {
            context: "query".to_string(),
            node_id: node_id.to_string(),
        })
    }

    pub fn get(&self, node_id: &str) -> Option<&EntityNode> {
        self.index_of(node_id).map(|i| &self.nodes[i])
    }

    /// Distinct relation labels present on edges.
    pub fn relation_labels(&self) -> &BTreeSet<String> {
        &self.relations
    }

    /// Out-degree in the augmented view (self-loops excluded).
    pub fn degree(&self, ix: NodeIx) -> usize {
        self.adjacency[ix].len()
    }

    /// Non-self-loop edges touching `ix`, ordered by the other endpoint.
    pub fn incident_edges(&self, ix: NodeIx) -> &[usize] {
        &self.adjacency[ix]
    }

    /// Arcs leaving `ix` in the augmented view, in ascending target order.
    pub fn arcs(&self, ix: NodeIx) -> impl Iterator<Item = Arc> + '_ {
        self.adjacency[ix].iter().map(move |&edge| {
            let (s, t) = self.endpoints[edge];
            if s == ix {
                Arc { edge, to: t, direction: Direction::Forward }
            } else {
                Arc { edge, to: s, direction: Direction::Inverse }
            }
        })
    }

    /// Both out- and in-neighbours of `node_id`, one entry per augmented arc.
    pub fn augmented_neighbors(&self, node_id: &str) -> Result<Vec<Neighbor>, KgError> {
        let ix = self.require(node_id)?;
        Ok(self
            .arcs(ix)
            .map(|a| Neighbor {
                relation: self.edges[a.edge].relation.clone(),
                node_id: self.nodes[a.to].node_id.clone(),
                direction: a.direction,
            })
            .collect())
    }

    /// Union of node provenance, deduplicated and sorted by chunk id.
    pub fn map_back<S: AsRef<str>>(&self, node_ids: &[S]) -> Result<Vec<String>, KgError> {
        let ixs = node_ids
            .iter()
            .map(|id| self.require(id.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.map_back_ix(&ixs))
    }

    pub fn map_back_ix(&self, ixs: &[NodeIx]) -> Vec<String> {
        let set: BTreeSet<&String> = ixs.iter().flat_map(|&i| self.nodes[i].provenance.iter()).collect();
        set.into_iter().cloned().collect()
    }

    /// Copy of the graph with the given nodes and all their incident edges removed.
    pub fn without_nodes(&self, removed: &BTreeSet<NodeIx>) -> KnowledgeGraph {
        let nodes: Vec<EntityNode> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, n)| n.clone())
            .collect();
        let edges: Vec<RelationEdge> = self
            .edges
            .iter()
            .zip(&self.endpoints)
            .filter(|(_, (s, t))| !removed.contains(s) && !removed.contains(t))
            .map(|(e, _)| e.clone())
            .collect();
        KnowledgeGraph::from_parts(nodes, edges, None).expect("subgraph of a valid graph is valid")
    }

    /// Serializes to graph-file records: nodes first, then edges.
    pub fn to_records(&self) -> Vec<GraphRecord> {
        let nodes = self.nodes.iter().map(|n| GraphRecord::Node {
            node_id: n.node_id.clone(),
            name: n.canonical_name.clone(),
            aliases: n.aliases.clone(),
            chunks: n.provenance.iter().cloned().collect(),
        });
        let edges = self.edges.iter().map(|e| GraphRecord::Edge {
            source: e.source.clone(),
            relation: e.relation.clone(),
            target: e.target.clone(),
            chunks: e.provenance.iter().cloned().collect(),
        });
        nodes.chain(edges).collect()
    }

    pub fn contains_triple(&self, source: &str, relation: &str, target: &str) -> bool {
        self.edges
            .binary_search_by(|e| e.key().cmp(&(source, relation, target)))
            .is_ok()
    }
}

pub fn graph_from_records(records: Vec<GraphRecord>, corpus: Option<&Corpus>) -> Result<KnowledgeGraph, KgError> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for r in records {
        match r {
            GraphRecord::Node { node_id, name, aliases, chunks } => {
                nodes.push(EntityNode::new(node_id, name).with_aliases(aliases).with_provenance(chunks));
            }
            GraphRecord::Edge { source, relation, target, chunks } => {
                edges.push(RelationEdge::new(source, relation, target).with_provenance(chunks));
            }
        }
    }
    KnowledgeGraph::from_parts(nodes, edges, corpus)
}

/// Loads a graph file and resolves its provenance against `corpus`.
pub fn load_graph(path: impl AsRef<Path>, corpus: &Corpus) -> Result<KnowledgeGraph, KgError> {
    let records: Vec<GraphRecord> = read_jsonl(path.as_ref())?;
    graph_from_records(records, Some(corpus))
}

pub fn save_graph(path: impl AsRef<Path>, graph: &KnowledgeGraph) -> Result<(), KgError> {
    write_jsonl(path.as_ref(), &graph.to_records())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph() -> KnowledgeGraph {
        let nodes = ["a", "b", "c"].map(|n| EntityNode::new(n, n.to_uppercase())).to_vec();
        let edges = vec![RelationEdge::new("a", "r", "b"), RelationEdge::new("b", "r", "c")];
        KnowledgeGraph::from_parts(nodes, edges, None).unwrap()
    }

    fn deg(g: &KnowledgeGraph, id: &str) -> usize {
        g.degree(g.index_of(id).unwrap())
    }

    #[test]
    fn no_edges_all_degrees_zero() {
        let nodes = vec![EntityNode::new("x", "X"), EntityNode::new("y", "Y")];
        let g = KnowledgeGraph::from_parts(nodes, vec![], None).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(deg(&g, "x"), 0);
        assert_eq!(deg(&g, "y"), 0);
    }

    #[test]
    fn augmented_degrees_on_path() {
        // Arcs of the augmented path: a->b, b->a, b->c, c->b.
        let g = path_graph();
        assert_eq!((deg(&g, "a"), deg(&g, "b"), deg(&g, "c")), (1, 2, 1));
    }

    #[test]
    fn duplicate_triples_collapse() {
        let nodes = vec![EntityNode::new("a", "A"), EntityNode::new("b", "B")];
        let edges = vec![
            RelationEdge::new("a", "r", "b").with_provenance(["c1"]),
            RelationEdge::new("a", "r", "b").with_provenance(["c2"]),
            RelationEdge::new("a", "s", "b"),
        ];
        let g = KnowledgeGraph::from_parts(nodes, edges, None).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.edges()[0].provenance.len(), 2);
        assert_eq!(deg(&g, "a"), 2);
    }

    #[test]
    fn unknown_endpoint_rejected() {
        let nodes = vec![EntityNode::new("a", "A")];
        let edges = vec![RelationEdge::new("a", "r", "zzz")];
        let err = KnowledgeGraph::from_parts(nodes, edges, None).unwrap_err();
        assert!(matches!(err, KgError::UnknownNode { node_id, .. } if node_id == "zzz"));
    }

    #[test]
    fn unknown_provenance_rejected() {
        let corpus = Corpus::from_chunks(vec![]).unwrap();
        let nodes = vec![EntityNode::new("a", "A").with_provenance(["c404"])];
        assert!(matches!(
            KnowledgeGraph::from_parts(nodes, vec![], Some(&corpus)),
            Err(KgError::UnknownChunk { .. })
        ));
    }

    #[test]
    fn self_loops_kept_but_not_traversed() {
        let nodes = vec![EntityNode::new("a", "A"), EntityNode::new("b", "B")];
        let edges = vec![RelationEdge::new("a", "self", "a"), RelationEdge::new("a", "r", "b")];
        let g = KnowledgeGraph::from_parts(nodes, edges, None).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(deg(&g, "a"), 1);
        assert_eq!(g.augmented_neighbors("a").unwrap().len(), 1);
    }

    #[test]
    fn neighbors_isolated_and_inverse() {
        let nodes = vec![EntityNode::new("a", "A"), EntityNode::new("b", "B"), EntityNode::new("z", "Z")];
        let g = KnowledgeGraph::from_parts(nodes, vec![RelationEdge::new("a", "r", "b")], None).unwrap();
        assert!(g.augmented_neighbors("z").unwrap().is_empty());
        assert_eq!(
            g.augmented_neighbors("b").unwrap(),
            vec![Neighbor { relation: "r".into(), node_id: "a".into(), direction: Direction::Inverse }]
        );
        assert!(g.augmented_neighbors("nope").is_err());
    }

    #[test]
    fn star_with_mixed_directions() {
        // Hand enumeration: hub->s1, s2->hub, hub->s3, s4->hub gives four arcs from hub.
        let mut nodes = vec![EntityNode::new("hub", "Hub")];
        nodes.extend((1..=4).map(|i| EntityNode::new(format!("s{i}"), format!("S{i}"))));
        let edges = vec![
            RelationEdge::new("hub", "r", "s1"),
            RelationEdge::new("s2", "r", "hub"),
            RelationEdge::new("hub", "q", "s3"),
            RelationEdge::new("s4", "q", "hub"),
        ];
        let g = KnowledgeGraph::from_parts(nodes, edges, None).unwrap();
        let n = g.augmented_neighbors("hub").unwrap();
        assert_eq!(n.len(), 4);
        let dirs: Vec<_> = n.iter().map(|x| (x.node_id.as_str(), x.direction)).collect();
        assert_eq!(
            dirs,
            vec![
                ("s1", Direction::Forward),
                ("s2", Direction::Inverse),
                ("s3", Direction::Forward),
                ("s4", Direction::Inverse)
            ]
        );
    }

    #[test]
    fn map_back_cases() {
        let nodes = vec![
            EntityNode::new("n1", "N1").with_provenance(["c1"]),
            EntityNode::new("n2", "N2").with_provenance(["c1", "c2"]),
            EntityNode::new("n3", "N3").with_provenance(["c3"]),
            EntityNode::new("n4", "N4"),
        ];
        let g = KnowledgeGraph::from_parts(nodes, vec![], None).unwrap();
        assert!(g.map_back::<&str>(&[]).unwrap().is_empty());
        assert_eq!(g.map_back(&["n1", "n2"]).unwrap(), vec!["c1", "c2"]);
        assert_eq!(g.map_back(&["n3", "n1", "n2"]).unwrap(), vec!["c1", "c2", "c3"]);
        assert!(g.map_back(&["n4"]).unwrap().is_empty());
        assert!(g.map_back(&["missing"]).is_err());
    }

    #[test]
    fn without_nodes_drops_incident_edges() {
        let g = path_graph();
        let removed: BTreeSet<NodeIx> = [g.index_of("b").unwrap()].into();
        let h = g.without_nodes(&removed);
        assert_eq!(h.node_count(), 2);
        assert_eq!(h.edge_count(), 0);
    }

    #[test]
    fn triple_lookup() {
        let g = path_graph();
        assert!(g.contains_triple("a", "r", "b"));
        assert!(!g.contains_triple("b", "r", "a"));
    }
}
