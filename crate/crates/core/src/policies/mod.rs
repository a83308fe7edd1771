//! Eviction policies: the shared contract, K-tail candidate selection, and
//! the classical baselines.
//!
//! Every ordering is total. Ties on the primary criterion fall back to
//! recency (least recently used first), and recency stamps are unique, so
//! replays are deterministic.

mod arc;
mod hybrid;
mod lfu;
mod lru;
mod size;

use std::fmt;
use std::str::FromStr;

pub use arc::{ArcPolicy, ArcState};
pub use hybrid::{hybrid_victims, HybridPolicy};
pub use lfu::{lfu_victims, LfuPolicy};
pub use lru::{lru_victims, LruPolicy};
pub use size::{size_victims, SizePolicy};

use crate::cache_sim::{CacheState, KeyId};
use crate::error::SimError;
use crate::features::{extract, RawFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalReason {
    Evicted,
    Expired,
}

/// Victims chosen for one eviction event.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    /// Resident, distinct keys in eviction order.
    pub victims: Vec<KeyId>,
    /// The policy substituted native LRU for its own decision.
    pub fallback: bool,
}

impl Selection {
    pub fn new(victims: Vec<KeyId>) -> Self {
        Self { victims, fallback: false }
    }

    pub fn fallback(victims: Vec<KeyId>) -> Self {
        Self { victims, fallback: true }
    }
}

/// The contract shared by classical, learned, and sidecar-backed policies.
///
/// `select_victims` must return resident, distinct keys whose sizes sum to
/// at least `needed` bytes, unless the cache holds less than that. A policy
/// restricted to a candidate window may return fewer bytes; the simulator
/// then tops up with native LRU and marks the event as a partial fallback.
pub trait EvictionPolicy {
    fn name(&self) -> &str;

    fn select_victims(&mut self, state: &CacheState, needed: u64) -> Result<Selection, SimError>;

    fn on_hit(&mut self, _state: &CacheState, _key: KeyId) -> Result<(), SimError> {
        Ok(())
    }

    /// Called for a miss that will be admitted, before space is made.
    fn on_miss(&mut self, _state: &CacheState, _key: KeyId, _size: u64) -> Result<(), SimError> {
        Ok(())
    }

    fn on_admit(&mut self, _state: &CacheState, _key: KeyId) -> Result<(), SimError> {
        Ok(())
    }

    fn on_remove(&mut self, _key: KeyId, _reason: RemovalReason) -> Result<(), SimError> {
        Ok(())
    }
}

impl<P: EvictionPolicy + ?Sized> EvictionPolicy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn select_victims(&mut self, state: &CacheState, needed: u64) -> Result<Selection, SimError> {
        (**self).select_victims(state, needed)
    }
    fn on_hit(&mut self, state: &CacheState, key: KeyId) -> Result<(), SimError> {
        (**self).on_hit(state, key)
    }
    fn on_miss(&mut self, state: &CacheState, key: KeyId, size: u64) -> Result<(), SimError> {
        (**self).on_miss(state, key, size)
    }
    fn on_admit(&mut self, state: &CacheState, key: KeyId) -> Result<(), SimError> {
        (**self).on_admit(state, key)
    }
    fn on_remove(&mut self, key: KeyId, reason: RemovalReason) -> Result<(), SimError> {
        (**self).on_remove(key, reason)
    }
}

/// An eviction candidate from the LRU tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub key: KeyId,
    /// Position in the candidate list, 0 = coldest.
    pub index: usize,
    pub raw: RawFeatures,
    pub size: u64,
}

/// The `k` coldest unexpired residents, coldest first.
///
/// Walks the recency list from the tail, so the cost is proportional to `k`
/// (plus any expired entries skipped), independent of cache size.
pub fn k_tail_candidates(state: &CacheState, k: usize) -> Vec<Candidate> {
    let now = state.now();
    state
        .iter_lru()
        .filter(|e| now < e.expires_at)
        .take(k)
        .enumerate()
        .map(|(index, e)| Candidate { key: e.key, index, raw: extract(e, now), size: e.size })
        .collect()
}

/// Takes keys from `order` until their sizes cover `needed`.
pub(crate) fn take_until<I>(state: &CacheState, order: I, needed: u64) -> Vec<KeyId>
where
    I: IntoIterator<Item = KeyId>,
{
    let mut freed = 0u64;
    let mut out = Vec::new();
    if needed == 0 {
        return out;
    }
    for key in order {
        let Some(e) = state.get(key) else { continue };
        freed += e.size;
        out.push(key);
        if freed >= needed {
            break;
        }
    }
    out
}

/// Policy names accepted on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Lru,
    Lfu,
    Size,
    Arc,
    Hybrid,
    ColdRl,
    Sidecar,
}

impl PolicyKind {
    pub const CLASSICAL: [PolicyKind; 5] =
        [PolicyKind::Lru, PolicyKind::Lfu, PolicyKind::Size, PolicyKind::Arc, PolicyKind::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
            PolicyKind::Size => "size",
            PolicyKind::Arc => "arc",
            PolicyKind::Hybrid => "hybrid",
            PolicyKind::ColdRl => "coldrl",
            PolicyKind::Sidecar => "sidecar",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, PolicyKind::ColdRl | PolicyKind::Sidecar)
    }

    /// Builds a classical baseline; learned kinds need a model and return `None`.
    pub fn build_classical(self, capacity: u64) -> Option<Box<dyn EvictionPolicy + Send>> {
        Some(match self {
            PolicyKind::Lru => Box::new(LruPolicy),
            PolicyKind::Lfu => Box::new(LfuPolicy::default()),
            PolicyKind::Size => Box::new(SizePolicy::default()),
            PolicyKind::Arc => Box::new(ArcPolicy::new(capacity)),
            PolicyKind::Hybrid => Box::new(HybridPolicy::default()),
            PolicyKind::ColdRl | PolicyKind::Sidecar => return None,
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "lru" => PolicyKind::Lru,
            "lfu" => PolicyKind::Lfu,
            "size" => PolicyKind::Size,
            "arc" => PolicyKind::Arc,
            "hybrid" => PolicyKind::Hybrid,
            "coldrl" => PolicyKind::ColdRl,
            "sidecar" => PolicyKind::Sidecar,
            other => {
                return Err(format!(
                    "unknown policy {other:?} (expected lru|lfu|size|arc|hybrid|coldrl|sidecar)"
                ))
            }
        })
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::cache_sim::{CacheState, KeyId};

    /// A cache with `n` residents, random sizes, hit counts, and recency.
    pub fn random_state(seed: u64, n: usize, max_size: u64) -> CacheState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<u64> = (0..n).map(|_| rng.random_range(1..=max_size)).collect();
        let mut state = CacheState::new(sizes.iter().sum::<u64>() + 1);
        for (i, &s) in sizes.iter().enumerate() {
            state.admit(i as KeyId, s, i as f64, 1e9, 1.0);
        }
        for t in 0..(n * 3) {
            let k = rng.random_range(0..n) as KeyId;
            state.touch(k, (n + t) as f64);
        }
        state.set_now((n * 4) as f64);
        state
    }

    /// Sum of victim sizes.
    pub fn bytes(state: &CacheState, victims: &[KeyId]) -> u64 {
        victims.iter().map(|&k| state.get(k).unwrap().size).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::random_state;
    use super::*;

    fn touched(order: &[KeyId]) -> CacheState {
        let mut s = CacheState::new(100);
        for (i, &k) in order.iter().enumerate() {
            s.admit(k, 1, i as f64, 1e6, 1.0);
        }
        s
    }

    #[test]
    fn truncates_to_residents() {
        assert_eq!(k_tail_candidates(&touched(&[0, 1, 2]), 8).len(), 3);
    }

    #[test]
    fn tail_is_coldest_first() {
        let c = k_tail_candidates(&touched(&[0, 1, 2]), 2);
        assert_eq!(c.iter().map(|c| c.key).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(c.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn expired_residents_are_not_candidates() {
        let mut s = CacheState::new(100);
        s.admit(0, 1, 0.0, 5.0, 1.0);
        s.admit(1, 1, 0.0, 50.0, 1.0);
        s.set_now(10.0);
        let c = k_tail_candidates(&s, 4);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].key, 1);
    }

    #[test]
    fn tail_matches_full_recency_sort() {
        let s = random_state(9, 10_000, 100);
        let mut all: Vec<_> = s.iter_mru().map(|e| (e.seq, e.key)).collect();
        all.sort();
        let expected: Vec<KeyId> = all.iter().take(16).map(|&(_, k)| k).collect();
        let got: Vec<KeyId> = k_tail_candidates(&s, 16).iter().map(|c| c.key).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn tail_is_prefix_of_lru_order() {
        for seed in 0..10 {
            let s = random_state(seed, 300, 50);
            let lru = lru_victims(&s, u64::MAX);
            let k = k_tail_candidates(&s, 32);
            assert_eq!(k.iter().map(|c| c.key).collect::<Vec<_>>(), lru[..32].to_vec());
        }
    }

    #[test]
    fn parses_policy_names() {
        for kind in PolicyKind::CLASSICAL.into_iter().chain([PolicyKind::ColdRl, PolicyKind::Sidecar]) {
            assert_eq!(kind.as_str().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("mru".parse::<PolicyKind>().is_err());
    }
}
