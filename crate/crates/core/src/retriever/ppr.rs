//! Degree-normalized personalized PageRank by power iteration.
//!
//! The walk runs on the inverse-augmented view: from `u` it moves along each
//! augmented arc with probability `1 / deg(u)` (parallel arcs count
//! separately). The restart distribution puts weight `deg(u)^-1 / Z` on every
//! seed with positive degree, so hub seeds do not dominate. Iteration solves
//!
//! ```text
//! r = alpha * p0 + (1 - alpha) * P^T r
//! ```
//!
//! starting from `r = p0`. Mass sitting on zero-degree nodes is sent back
//! through `p0` each step, so every iterate sums to one.

use crate::kg::{KnowledgeGraph, NodeIx};

use super::{RetrieverConfig, RetrieverError, Telemetry};

#[derive(Debug, Clone, PartialEq)]
pub struct PprRun {
    /// Score per node index.
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// L-infinity change of the final step.
    pub residual: f64,
    pub converged: bool,
}

/// Restart distribution over `seeds`.
///
/// If every seed is isolated the weights fall back to uniform over the seeds
/// when `dangling_fallback` is set, and fail otherwise.
pub fn personalization(g: &KnowledgeGraph, seeds: &[NodeIx], dangling_fallback: bool) -> Result<Vec<f64>, RetrieverError> {
    if seeds.is_empty() {
        return Err(RetrieverError::NoSeeds);
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let mut p0 = vec![0.0; g.node_count()];
    let z: f64 = seeds.iter().filter(|&&s| g.degree(s) > 0).map(|&s| 1.0 / g.degree(s) as f64).sum();
    if z > 0.0 {
        for &s in &seeds {
            let d = g.degree(s);
            if d > 0 {
                p0[s] = (1.0 / d as f64) / z;
            }
        }
    } else if dangling_fallback {
        let w = 1.0 / seeds.len() as f64;
        for &s in &seeds {
            p0[s] = w;
        }
    } else {
        return Err(RetrieverError::DegeneratePersonalization);
    }
    Ok(p0)
}

/// Runs power iteration, calling `observe(iteration, scores)` after each step.
pub fn ppr_scores_observed(
    g: &KnowledgeGraph,
    seeds: &[NodeIx],
    cfg: &RetrieverConfig,
    tel: &mut Telemetry,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<PprRun, RetrieverError> {
    cfg.validate()?;
    let alpha = cfg.alpha;
    let p0 = personalization(g, seeds, cfg.ppr_dangling_fallback)?;
    tel.ppr_runs += 1;
    let n = g.node_count();
    let mut r = p0.clone();
    let mut next = vec![0.0; n];
    let mut run = PprRun { scores: Vec::new(), iterations: 0, residual: f64::INFINITY, converged: false };
    for it in 1..=cfg.ppr_max_iters {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut dangling = 0.0;
        for (u, &ru) in r.iter().enumerate() {
            let d = g.degree(u);
            if d == 0 {
                dangling += ru;
                continue;
            }
            let share = ru / d as f64;
            for arc in g.arcs(u) {
                next[arc.to] += share;
            }
        }
        let mut residual: f64 = 0.0;
        for v in 0..n {
            let val = alpha * p0[v] + (1.0 - alpha) * (next[v] + dangling * p0[v]);
            residual = residual.max((val - r[v]).abs());
            next[v] = val;
        }
        std::mem::swap(&mut r, &mut next);
        tel.ppr_iterations += 1;
        run.iterations = it;
        run.residual = residual;
        observe(it, &r);
        if residual < cfg.ppr_epsilon {
            run.converged = true;
            break;
        }
    }
    run.scores = r;
    Ok(run)
}

pub fn ppr_scores(
    g: &KnowledgeGraph,
    seeds: &[NodeIx],
    cfg: &RetrieverConfig,
    tel: &mut Telemetry,
) -> Result<PprRun, RetrieverError> {
    ppr_scores_observed(g, seeds, cfg, tel, |_, _| {})
}

/// Up to `top_l` positive-score nodes, by descending score then node id.
pub fn top_nodes(scores: &[f64], top_l: usize) -> Vec<NodeIx> {
    let mut ranked: Vec<NodeIx> = (0..scores.len()).filter(|&u| scores[u] > 0.0).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ranked.truncate(top_l);
    ranked
}
