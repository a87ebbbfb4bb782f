//! QA and evidence metrics.
//!
//! Answers are compared after the usual QA normalization: lowercase, drop
//! punctuation, drop the articles "a", "an", "the", collapse whitespace.

use std::collections::{BTreeSet, HashMap};

use crate::text::normalize_answer;

use super::BenchError;

/// 1.0 when the normalized prediction equals some normalized gold, else 0.0.
pub fn exact_match(prediction: &str, golds: &[String]) -> f64 {
    let p = normalize_answer(prediction);
    if golds.iter().any(|g| normalize_answer(g) == p) {
        1.0
    } else {
        0.0
    }
}

fn f1_pair(prediction: &str, gold: &str) -> f64 {
    let p: Vec<String> = normalize_answer(prediction).split_whitespace().map(str::to_string).collect();
    let g: Vec<String> = normalize_answer(gold).split_whitespace().map(str::to_string).collect();
    if p.is_empty() || g.is_empty() {
        return if p == g { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best bag-of-tokens F1 against any gold.
pub fn token_f1(prediction: &str, golds: &[String]) -> f64 {
    golds.iter().map(|g| f1_pair(prediction, g)).fold(0.0, f64::max)
}

/// Fraction of `gold` found among the first `k` entries of `ranking`.
/// `None` when `gold` is empty.
pub fn recall_at_k(ranking: &[String], gold: &BTreeSet<String>, k: usize) -> Result<Option<f64>, BenchError> {
    if k == 0 {
        return Err(BenchError::InvalidK);
    }
    if gold.is_empty() {
        return Ok(None);
    }
    let hits = ranking.iter().take(k).collect::<BTreeSet<_>>().into_iter().filter(|c| gold.contains(*c)).count();
    Ok(Some(hits as f64 / gold.len() as f64))
}

/// Nearest-rank percentile of `values` (`q` in (0, 1]); `None` when empty.
pub fn nearest_rank(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}
