use std::cmp::Reverse;
use std::collections::BTreeSet;

use super::{take_until, EvictionPolicy, RemovalReason, Selection};
use crate::cache_sim::{CacheState, KeyId};
use crate::error::SimError;

/// Largest objects first, least recently used first among equal sizes.
pub fn size_victims(state: &CacheState, needed: u64) -> Vec<KeyId> {
    let mut order: Vec<_> = state.iter_lru().map(|e| (Reverse(e.size), e.seq, e.key)).collect();
    order.sort_unstable();
    take_until(state, order.into_iter().map(|(_, _, k)| k), needed)
}

/// Size-based eviction over an ordered index of `(-size, recency, key)`.
#[derive(Debug, Clone, Default)]
pub struct SizePolicy {
    index: BTreeSet<(Reverse<u64>, u64, KeyId)>,
    current: Vec<Option<(u64, u64)>>,
}

impl SizePolicy {
    fn upsert(&mut self, state: &CacheState, key: KeyId) -> Result<(), SimError> {
        let e = state.get(key).ok_or_else(|| SimError::Desync {
            policy: "size".into(),
            detail: format!("hook for non-resident key {key}"),
        })?;
        let idx = key as usize;
        if idx >= self.current.len() {
            self.current.resize(idx + 1, None);
        }
        if let Some((sz, s)) = self.current[idx].take() {
            self.index.remove(&(Reverse(sz), s, key));
        }
        self.current[idx] = Some((e.size, e.seq));
        self.index.insert((Reverse(e.size), e.seq, key));
        Ok(())
    }
}

impl EvictionPolicy for SizePolicy {
    fn name(&self) -> &str {
        "size"
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
        if let Some((sz, s)) = self.current.get_mut(key as usize).and_then(Option::take) {
            self.index.remove(&(Reverse(sz), s, key));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache_sim::{Request, SimConfig, Simulator};
    use crate::policies::testutil::random_state;

    #[test]
    fn largest_first() {
        let mut s = CacheState::new(2 << 20);
        s.admit(0, 1 << 20, 0.0, 100.0, 1.0);
        s.admit(1, 1 << 10, 1.0, 100.0, 1.0);
        assert_eq!(size_victims(&s, 1), vec![0]);
        // one huge object covers the need by itself
        assert_eq!(size_victims(&s, 1000), vec![0]);
    }

    #[test]
    fn matches_sort_oracle() {
        for seed in 0..20 {
            let s = random_state(seed, 150, 30);
            let mut all: Vec<_> = s.iter_lru().map(|e| (Reverse(e.size), e.seq, e.key)).collect();
            all.sort();
            let needed = 200;
            let mut freed = 0;
            let mut expected = Vec::new();
            for (Reverse(sz), _, k) in all {
                if freed >= needed {
                    break;
                }
                freed += sz;
                expected.push(k);
            }
            assert_eq!(size_victims(&s, needed), expected);
        }
    }

    #[test]
    fn indexed_policy_agrees_with_sort() {
        let mut sim = Simulator::new(300, SimConfig { time_decisions: false, audit: true }).unwrap();
        let mut p = SizePolicy::default();
        let mut x = 99u64;
        for t in 0..5000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let key = ((x >> 33) % 150) as KeyId;
            let size = 1 + (key as u64 * 13) % 25;
            let req = Request { ts: t as f64, key, size, ttl: 200.0, origin_rtt: 1.0 };
            let needed = (sim.state().used() + size).saturating_sub(300);
            if !sim.state().contains(key) && needed > 0 {
                assert_eq!(
                    p.select_victims(sim.state(), needed).unwrap().victims,
                    size_victims(sim.state(), needed)
                );
            }
            sim.step(&req, &mut p).unwrap();
        }
    }
}
