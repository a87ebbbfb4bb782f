//! Breadth-first primitives over the inverse-augmented view.
//!
//! Neighbours are always visited in ascending node-id order, which makes BFS
//! trees, bridge sets and extracted paths fully deterministic.

use std::collections::VecDeque;

use crate::kg::{KnowledgeGraph, NodeIx};

use super::Telemetry;

/// Hop distance from `src` for every node within `max_depth`, `None` beyond.
pub fn bfs_distances(g: &KnowledgeGraph, src: NodeIx, max_depth: usize, tel: &mut Telemetry) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].expect("queued nodes have a distance");
        if d == max_depth {
            continue;
        }
        tel.bfs_expansions += 1;
        for arc in g.arcs(u) {
            if dist[arc.to].is_none() {
                dist[arc.to] = Some(d + 1);
                queue.push_back(arc.to);
            }
        }
    }
    dist
}

/// Nodes within `k` hops of `v`, including `v`, in ascending order.
pub fn khop_set(g: &KnowledgeGraph, v: NodeIx, k: usize, tel: &mut Telemetry) -> Vec<NodeIx> {
    tel.khop_calls += 1;
    bfs_distances(g, v, k, tel)
        .into_iter()
        .enumerate()
        .filter_map(|(u, d)| d.map(|_| u))
        .collect()
}

/// Non-seed nodes within `k` hops of at least two distinct seeds, ascending.
/// Returns the per-seed distance tables alongside so path extraction can reuse them.
pub fn find_bridges_with_distances(
    g: &KnowledgeGraph,
    seeds: &[NodeIx],
    k: usize,
    tel: &mut Telemetry,
) -> (Vec<NodeIx>, Vec<Vec<Option<usize>>>) {
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let tables: Vec<Vec<Option<usize>>> = seeds
        .iter()
        .map(|&s| {
            tel.khop_calls += 1;
            bfs_distances(g, s, k, tel)
        })
        .collect();
    let bridges = (0..g.node_count())
        .filter(|u| seeds.binary_search(u).is_err())
        .filter(|&u| tables.iter().filter(|t| t[u].is_some()).count() >= 2)
        .collect();
    (bridges, tables)
}

pub fn find_bridges(g: &KnowledgeGraph, seeds: &[NodeIx], k: usize, tel: &mut Telemetry) -> Vec<NodeIx> {
    find_bridges_with_distances(g, seeds, k, tel).0
}

/// Up to `max_paths` shortest paths from `from` toward the root of
/// `dist_to_target` (a BFS table from the target), as edge-index sequences.
/// Paths come out in lexicographic order of their node sequences; between
/// two consecutive nodes the lowest-index edge is used.
pub fn shortest_paths_to(
    g: &KnowledgeGraph,
    from: NodeIx,
    dist_to_target: &[Option<usize>],
    max_paths: usize,
) -> Vec<Vec<usize>> {
    fn walk(
        g: &KnowledgeGraph,
        at: NodeIx,
        dist: &[Option<usize>],
        max_paths: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if out.len() >= max_paths {
            return;
        }
        let d = match dist[at] {
            Some(0) => {
                out.push(stack.clone());
                return;
            }
            Some(d) => d,
            None => return,
        };
        let mut last = None;
        for arc in g.arcs(at) {
            if last == Some(arc.to) || dist[arc.to] != Some(d - 1) {
                continue;
            }
            last = Some(arc.to);
            stack.push(arc.edge);
            walk(g, arc.to, dist, max_paths, stack, out);
            stack.pop();
            if out.len() >= max_paths {
                return;
            }
        }
    }
    let mut out = Vec::new();
    if max_paths > 0 {
        walk(g, from, dist_to_target, max_paths, &mut Vec::new(), &mut out);
    }
    out
}

/// Edges of up to `max_paths_per_pair` shortest paths from `bridge` to each
/// seed within `k` hops, in seed order then path order, without repeats.
pub fn bridge_paths(
    g: &KnowledgeGraph,
    bridge: NodeIx,
    seeds: &[NodeIx],
    k: usize,
    max_paths_per_pair: usize,
    tel: &mut Telemetry,
) -> Vec<usize> {
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let tables: Vec<Vec<Option<usize>>> = seeds.iter().map(|&s| bfs_distances(g, s, k, tel)).collect();
    bridge_paths_with(g, bridge, &tables, max_paths_per_pair)
}

pub(crate) fn bridge_paths_with(
    g: &KnowledgeGraph,
    bridge: NodeIx,
    seed_tables: &[Vec<Option<usize>>],
    max_paths_per_pair: usize,
) -> Vec<usize> {
    let mut edges = Vec::new();
    for table in seed_tables {
        for path in shortest_paths_to(g, bridge, table, max_paths_per_pair) {
            for e in path {
                if !edges.contains(&e) {
                    edges.push(e);
                }
            }
        }
    }
    edges
}
