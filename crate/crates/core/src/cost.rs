//! Per-run cost accounting.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Serialize, Serializer};

use crate::oracles::Usage;

fn as_millis<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

/// Oracle calls per slot, token totals and elapsed time for one run.
/// All fields only grow while a run is in progress.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CostCounters {
    pub oracle_calls: BTreeMap<String, u64>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Sum of latencies reported by the oracles.
    #[serde(rename = "oracle_time_ms", serialize_with = "as_millis")]
    pub oracle_time: Duration,
    /// End-to-end latency of the run (see [`crate::controller::TimingMode`]).
    #[serde(rename = "wall_time_ms", serialize_with = "as_millis")]
    pub wall_time: Duration,
}

impl CostCounters {
    pub fn record(&mut self, slot: &str, usage: &Usage) {
        *self.oracle_calls.entry(slot.to_string()).or_insert(0) += 1;
        self.prompt_tokens += usage.prompt_tokens;
        self.completion_tokens += usage.completion_tokens;
        self.oracle_time += usage.latency;
    }

    pub fn calls(&self, slot: &str) -> u64 {
        self.oracle_calls.get(slot).copied().unwrap_or(0)
    }

    pub fn total_calls(&self) -> u64 {
        self.oracle_calls.values().sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    pub fn merge(&mut self, other: &CostCounters) {
        for (k, v) in &other.oracle_calls {
            *self.oracle_calls.entry(k.clone()).or_insert(0) += v;
        }
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.oracle_time += other.oracle_time;
        self.wall_time += other.wall_time;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_and_merge() {
        let mut a = CostCounters::default();
        a.record("generator", &Usage { prompt_tokens: 10, completion_tokens: 5, latency: Duration::from_millis(3) });
        a.record("generator", &Usage::default());
        let mut b = CostCounters::default();
        b.record("judge", &Usage { prompt_tokens: 1, completion_tokens: 1, latency: Duration::ZERO });
        b.merge(&a);
        assert_eq!(b.calls("generator"), 2);
        assert_eq!(b.total_calls(), 3);
        assert_eq!(b.total_tokens(), 17);
        assert_eq!(b.oracle_time, Duration::from_millis(3));
    }
}
