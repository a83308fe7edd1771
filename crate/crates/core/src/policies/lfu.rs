use std::collections::BTreeSet;

use super::{take_until, EvictionPolicy, RemovalReason, Selection};
use crate::cache_sim::{CacheState, KeyId};
use crate::error::SimError;

/// Ascending hit count, least recently used first among equals.
pub fn lfu_victims(state: &CacheState, needed: u64) -> Vec<KeyId> {
    let mut order: Vec<_> = state.iter_lru().map(|e| (e.hit_count, e.seq, e.key)).collect();
    order.sort_unstable();
    take_until(state, order.into_iter().map(|(_, _, k)| k), needed)
}

/// In-cache LFU kept as an ordered index of `(hit_count, recency, key)`.
#[derive(Debug, Clone, Default)]
pub struct LfuPolicy {
    index: BTreeSet<(u32, u64, KeyId)>,
    current: Vec<Option<(u32, u64)>>,
}

impl LfuPolicy {
    fn upsert(&mut self, state: &CacheState, key: KeyId) -> Result<(), SimError> {
        let e = state.get(key).ok_or_else(|| SimError::Desync {
            policy: "lfu".into(),
            detail: format!("hook for non-resident key {key}"),
        })?;
        let idx = key as usize;
        if idx >= self.current.len() {
            self.current.resize(idx + 1, None);
        }
        if let Some((c, s)) = self.current[idx].take() {
            self.index.remove(&(c, s, key));
        }
        self.current[idx] = Some((e.hit_count, e.seq));
        self.index.insert((e.hit_count, e.seq, key));
        Ok(())
    }
}

impl EvictionPolicy for LfuPolicy {
    fn name(&self) -> &str {
        "lfu"
    }

    fn select_victims(&mut self, state: &CacheState, needed: u64) -> Result<Selection, SimError> {
        Ok(Selection::new(take_until(state, self.index.iter().map(|&(_, _, k)| k), needed)))
    }

    fn on_hit(&mut self, state: &CacheState, key: KeyId) -> Result<(), SimError> {
        self.upsert(state, key)
    }

    fn on_admit(&mut self, state: &CacheState, key: KeyId) -> Result<(), SimError> {
        self.upsert(state, key)
    }

    fn on_remove(&mut self, key: KeyId, _reason: RemovalReason) -> Result<(), SimError> {
        if let Some((c, s)) = self.current.get_mut(key as usize).and_then(Option::take) {
            self.index.remove(&(c, s, key));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache_sim::{Request, SimConfig, Simulator};
    use crate::policies::lru_victims;
    use crate::policies::testutil::random_state;

    #[test]
    fn lowest_count_first() {
        let mut s = CacheState::new(10);
        s.admit(0, 1, 0.0, 100.0, 1.0);
        s.admit(1, 1, 0.0, 100.0, 1.0);
        for t in 0..5 {
            s.touch(1, t as f64);
        }
        s.touch(0, 9.0); // A: 1 hit, but more recent
        s.admit(2, 1, 9.0, 100.0, 1.0);
        assert_eq!(lfu_victims(&s, 1), vec![2]);
        assert_eq!(lfu_victims(&s, 2), vec![2, 0]);
    }

    #[test]
    fn equal_counts_reduce_to_lru() {
        let mut s = CacheState::new(100);
        for k in 0..10 {
            s.admit(k, 1 + k as u64, k as f64, 100.0, 1.0);
        }
        assert_eq!(lfu_victims(&s, 20), lru_victims(&s, 20));
    }

    #[test]
    fn matches_sort_oracle() {
        for seed in 0..20 {
            let s = random_state(seed, 150, 100);
            let mut all: Vec<_> = s.iter_lru().map(|e| (e.hit_count, e.seq, e.key)).collect();
            all.sort();
            let needed = 1000;
            let mut freed = 0;
            let expected: Vec<KeyId> = all
                .iter()
                .take_while(|&&(_, _, k)| {
                    let go = freed < needed;
                    freed += s.get(k).unwrap().size;
                    go
                })
                .map(|&(_, _, k)| k)
                .collect();
            assert_eq!(lfu_victims(&s, needed), expected);
        }
    }

    #[test]
    fn indexed_policy_agrees_with_sort() {
        let mut sim = Simulator::new(400, SimConfig { time_decisions: false, audit: true }).unwrap();
        let mut p = LfuPolicy::default();
        let mut x = 12345u64;
        for t in 0..5000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let key = ((x >> 33) % 120) as KeyId;
            let size = 1 + (key as u64 * 7) % 40;
            let req = Request { ts: t as f64, key, size, ttl: 300.0, origin_rtt: 1.0 };
            let needed = (sim.state().used() + size).saturating_sub(400);
            if !sim.state().contains(key) && needed > 0 {
                let from_index = p.select_victims(sim.state(), needed).unwrap().victims;
                assert_eq!(from_index, lfu_victims(sim.state(), needed));
            }
            sim.step(&req, &mut p).unwrap();
        }
    }
}
