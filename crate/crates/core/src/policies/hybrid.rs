//! Rank blend of recency and size.
//!
//! `score = w * rank_recency / n + (1 - w) * rank_size / n`, where
//! `rank_recency` is 0 for the most recent resident and `n - 1` for the
//! coldest, and `rank_size` orders residents by ascending size (more recent
//! first among equal sizes). Victims are taken in descending score, colder
//! first on ties. `w = 1` reduces to LRU and `w = 0` to size-based eviction.

use std::cmp::Ordering;

use super::{take_until, EvictionPolicy, Selection};
use crate::cache_sim::{CacheState, KeyId};
use crate::error::SimError;

pub const DEFAULT_HYBRID_WEIGHT: f64 = 0.5;

pub fn hybrid_victims(state: &CacheState, needed: u64, w: f64) -> Vec<KeyId> {
    let n = state.len();
    if n == 0 || needed == 0 {
        return Vec::new();
    }
    // (key, seq, size, rank_recency)
    let mut rows: Vec<(KeyId, u64, u64, usize)> =
        state.iter_mru().enumerate().map(|(r, e)| (e.key, e.seq, e.size, r)).collect();
    let mut by_size: Vec<usize> = (0..n).collect();
    by_size.sort_unstable_by(|&a, &b| rows[a].2.cmp(&rows[b].2).then(rows[b].1.cmp(&rows[a].1)));
    let mut size_rank = vec![0usize; n];
    for (rank, &i) in by_size.iter().enumerate() {
        size_rank[i] = rank;
    }
    let nf = n as f64;
    let mut scored: Vec<(f64, u64, KeyId)> = rows
        .drain(..)
        .enumerate()
        .map(|(i, (key, seq, _, rr))| {
            (w * rr as f64 / nf + (1.0 - w) * size_rank[i] as f64 / nf, seq, key)
        })
        .collect();
    scored.sort_unstable_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    take_until(state, scored.into_iter().map(|(_, _, k)| k), needed)
}

#[derive(Debug, Clone, Copy)]
pub struct HybridPolicy {
    pub weight: f64,
}

impl Default for HybridPolicy {
    fn default() -> Self {
        Self { weight: DEFAULT_HYBRID_WEIGHT }
    }
}

impl EvictionPolicy for HybridPolicy {
    fn name(&self) -> &str {
        "hybrid"
    }

    fn select_victims(&mut self, state: &CacheState, needed: u64) -> Result<Selection, SimError> {
        Ok(Selection::new(hybrid_victims(state, needed, self.weight)))
    }
}
