//! Adaptive Replacement Cache, measured in bytes.
//!
//! `t1` holds objects seen once during their residency, `t2` objects seen at
//! least twice; `b1`/`b2` remember recently evicted keys of each list. The
//! target `p` is the byte share `t1` should get. A ghost hit in `b1` grows
//! `p` by the ghost's size scaled by `max(1, |b2|/|b1|)`, a ghost hit in
//! `b2` shrinks it symmetrically, clamped to `[0, capacity]`. With unit
//! sizes every rule reduces to the page-based algorithm.

use super::{EvictionPolicy, RemovalReason, Selection};
use crate::cache_sim::{CacheState, KeyId};
use crate::error::SimError;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArcList {
    #[default]
    None,
    T1,
    T2,
    B1,
    B2,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    list: ArcList,
    prev: u32,
    next: u32,
    size: u64,
}

impl Default for Node {
    fn default() -> Self {
        Self { list: ArcList::None, prev: NIL, next: NIL, size: 0 }
    }
}

/// An intrusive list; `head` is the most recently inserted end.
#[derive(Debug, Clone, Copy)]
struct List {
    head: u32,
    tail: u32,
    len: usize,
    bytes: u64,
}

impl Default for List {
    fn default() -> Self {
        Self { head: NIL, tail: NIL, len: 0, bytes: 0 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ArcState {
    nodes: Vec<Node>,
    t1: List,
    t2: List,
    b1: List,
    b2: List,
    /// Target byte size of `t1`.
    p: f64,
}

impl ArcState {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn list_of(&self, key: KeyId) -> ArcList {
        self.nodes.get(key as usize).map_or(ArcList::None, |n| n.list)
    }

    /// `(len, bytes)` of a list.
    pub fn list_size(&self, list: ArcList) -> (usize, u64) {
        match list {
            ArcList::None => (0, 0),
            l => {
                let l = *self.list(l);
                (l.len, l.bytes)
            }
        }
    }

    /// Keys of a list from its LRU end to its MRU end.
    pub fn keys(&self, list: ArcList) -> Vec<KeyId> {
        if list == ArcList::None {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut cur = self.list(list).tail;
        while cur != NIL {
            out.push(cur);
            cur = self.nodes[cur as usize].prev;
        }
        out
    }

    fn list(&self, l: ArcList) -> &List {
        match l {
            ArcList::T1 => &self.t1,
            ArcList::T2 => &self.t2,
            ArcList::B1 => &self.b1,
            ArcList::B2 => &self.b2,
            ArcList::None => unreachable!("no list for ArcList::None"),
        }
    }

    fn list_mut(&mut self, l: ArcList) -> &mut List {
        match l {
            ArcList::T1 => &mut self.t1,
            ArcList::T2 => &mut self.t2,
            ArcList::B1 => &mut self.b1,
            ArcList::B2 => &mut self.b2,
            ArcList::None => unreachable!("no list for ArcList::None"),
        }
    }

    fn unlink(&mut self, key: KeyId) {
        let Node { list, prev, next, size } = self.nodes[key as usize];
        if list == ArcList::None {
            return;
        }
        if prev != NIL {
            self.nodes[prev as usize].next = next;
        } else {
            self.list_mut(list).head = next;
        }
        if next != NIL {
            self.nodes[next as usize].prev = prev;
        } else {
            self.list_mut(list).tail = prev;
        }
        let l = self.list_mut(list);
        l.len -= 1;
        l.bytes -= size;
        self.nodes[key as usize] = Node { size, ..Node::default() };
    }

    fn push_mru(&mut self, list: ArcList, key: KeyId, size: u64) {
        if key as usize >= self.nodes.len() {
            self.nodes.resize(key as usize + 1, Node::default());
        }
        self.unlink(key);
        let old = self.list(list).head;
        self.nodes[key as usize] = Node { list, prev: NIL, next: old, size };
        if old != NIL {
            self.nodes[old as usize].prev = key;
        }
        let l = self.list_mut(list);
        if l.tail == NIL {
            l.tail = key;
        }
        l.head = key;
        l.len += 1;
        l.bytes += size;
    }

    fn lru(&self, list: ArcList) -> Option<KeyId> {
        let t = self.list(list).tail;
        (t != NIL).then_some(t)
    }

    fn size_of(&self, key: KeyId) -> u64 {
        self.nodes[key as usize].size
    }
}

#[derive(Debug, Clone)]
pub struct ArcPolicy {
    capacity: u64,
    state: ArcState,
    /// Ghost list the pending miss was found in.
    ghost_hit: Option<ArcList>,
    /// `t1` alone fills the directory: the next victim leaves no ghost.
    drop_t1_lru: bool,
}

impl ArcPolicy {
    pub fn new(capacity: u64) -> Self {
        Self { capacity, state: ArcState::default(), ghost_hit: None, drop_t1_lru: false }
    }

    pub fn arc_state(&self) -> &ArcState {
        &self.state
    }

    fn desync(detail: String) -> SimError {
        SimError::Desync { policy: "arc".into(), detail }
    }

    /// One REPLACE step: demote the LRU of `t1` or `t2` to its ghost list.
    fn replace(&mut self) -> Option<KeyId> {
        let s = &mut self.state;
        let t1_bytes = s.t1.bytes as f64;
        let from_t1 = s.t1.len >= 1
            && ((self.ghost_hit == Some(ArcList::B2) && t1_bytes == s.p) || t1_bytes > s.p);
        let (from, to) = if from_t1 || s.t2.len == 0 {
            (ArcList::T1, ArcList::B1)
        } else {
            (ArcList::T2, ArcList::B2)
        };
        let key = s.lru(from)?;
        let size = s.size_of(key);
        s.push_mru(to, key, size);
        Some(key)
    }
}

impl EvictionPolicy for ArcPolicy {
    fn name(&self) -> &str {
        "arc"
    }

    fn select_victims(&mut self, state: &CacheState, needed: u64) -> Result<Selection, SimError> {
        let mut victims = Vec::new();
        let mut freed = 0u64;
        while freed < needed {
            let key = if self.drop_t1_lru {
                self.drop_t1_lru = false;
                match self.state.lru(ArcList::T1) {
                    Some(k) => {
                        self.state.unlink(k);
                        Some(k)
                    }
                    None => self.replace(),
                }
            } else {
                self.replace()
            };
            let Some(key) = key else { break };
            let entry = state
                .get(key)
                .ok_or_else(|| Self::desync(format!("list member {key} is not resident")))?;
            freed += entry.size;
            victims.push(key);
        }
        Ok(Selection::new(victims))
    }

    fn on_hit(&mut self, _state: &CacheState, key: KeyId) -> Result<(), SimError> {
        match self.state.list_of(key) {
            ArcList::T1 | ArcList::T2 => {
                let size = self.state.size_of(key);
                self.state.push_mru(ArcList::T2, key, size);
                Ok(())
            }
            other => Err(Self::desync(format!("hit on key {key} found in {other:?}"))),
        }
    }

    fn on_miss(&mut self, _state: &CacheState, key: KeyId, size: u64) -> Result<(), SimError> {
        let c = self.capacity as f64;
        let s = &mut self.state;
        match s.list_of(key) {
            ArcList::B1 => {
                let ratio = s.b2.bytes as f64 / s.b1.bytes as f64;
                s.p = (s.p + size as f64 * ratio.max(1.0)).min(c);
                s.unlink(key);
                self.ghost_hit = Some(ArcList::B1);
            }
            ArcList::B2 => {
                let ratio = s.b1.bytes as f64 / s.b2.bytes as f64;
                s.p = (s.p - size as f64 * ratio.max(1.0)).max(0.0);
                s.unlink(key);
                self.ghost_hit = Some(ArcList::B2);
            }
            ArcList::None => {
                self.ghost_hit = None;
                let cap = self.capacity;
                if s.t1.bytes + s.b1.bytes + size > cap {
                    while s.t1.bytes + s.b1.bytes + size > cap {
                        match s.lru(ArcList::B1) {
                            Some(g) => s.unlink(g),
                            None => break,
                        }
                    }
                    if s.t1.bytes + s.b1.bytes + size > cap {
                        self.drop_t1_lru = true;
                    }
                } else {
                    while s.t1.bytes + s.t2.bytes + s.b1.bytes + s.b2.bytes + size > 2 * cap {
                        match s.lru(ArcList::B2) {
                            Some(g) => s.unlink(g),
                            None => break,
                        }
                    }
                }
            }
            resident => {
                return Err(Self::desync(format!("miss on key {key} found in {resident:?}")))
            }
        }
        Ok(())
    }

    fn on_admit(&mut self, state: &CacheState, key: KeyId) -> Result<(), SimError> {
        let size = state
            .get(key)
            .ok_or_else(|| Self::desync(format!("admitted key {key} is not resident")))?
            .size;
        let list = if self.ghost_hit.take().is_some() { ArcList::T2 } else { ArcList::T1 };
        self.state.push_mru(list, key, size);
        self.drop_t1_lru = false;
        Ok(())
    }

    fn on_remove(&mut self, key: KeyId, reason: RemovalReason) -> Result<(), SimError> {
        let list = self.state.list_of(key);
        let size = match list {
            ArcList::T1 | ArcList::T2 => self.state.size_of(key),
            _ => return Ok(()),
        };
        match (reason, list) {
            (RemovalReason::Expired, _) => self.state.unlink(key),
            (RemovalReason::Evicted, ArcList::T1) => self.state.push_mru(ArcList::B1, key, size),
            (RemovalReason::Evicted, _) => self.state.push_mru(ArcList::B2, key, size),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache_sim::{Request, SimConfig, Simulator};
    use crate::policies::LruPolicy;

    fn unit(ts: usize, key: KeyId) -> Request {
        Request { ts: ts as f64, key, size: 1, ttl: 1e12, origin_rtt: 1.0 }
    }

    fn sim(cap: u64) -> Simulator {
        Simulator::new(cap, SimConfig { time_decisions: false, audit: true }).unwrap()
    }

    #[test]
    fn first_touch_only_behaves_like_lru() {
        let (mut a, mut b) = (sim(5), sim(5));
        let mut arc = ArcPolicy::new(5);
        let mut lru = LruPolicy;
        for t in 0..40 {
            let r = unit(t, t as KeyId);
            a.step(&r, &mut arc).unwrap();
            b.step(&r, &mut lru).unwrap();
            let ka: Vec<_> = a.state().iter_lru().map(|e| e.key).collect();
            let kb: Vec<_> = b.state().iter_lru().map(|e| e.key).collect();
            assert_eq!(ka, kb);
        }
        assert_eq!(arc.arc_state().p(), 0.0);
    }

    #[test]
    fn ghost_hits_move_p_in_both_directions() {
        let mut s = sim(2);
        let mut arc = ArcPolicy::new(2);
        for (t, k) in [0, 1, 0, 2].into_iter().enumerate() {
            s.step(&unit(t, k), &mut arc).unwrap();
        }
        let st = arc.arc_state();
        assert_eq!((st.list_of(0), st.list_of(1), st.list_of(2)), (ArcList::T2, ArcList::B1, ArcList::T1));
        s.step(&unit(4, 1), &mut arc).unwrap();
        assert_eq!(arc.arc_state().p(), 1.0);
        assert_eq!(arc.arc_state().list_of(0), ArcList::B2);
        assert_eq!(arc.arc_state().list_of(1), ArcList::T2);
        s.step(&unit(5, 0), &mut arc).unwrap();
        assert_eq!(arc.arc_state().p(), 0.0);
    }

    #[test]
    fn p_is_clamped() {
        let mut s = sim(3);
        let mut arc = ArcPolicy::new(3);
        let mut t = 0;
        for round in 0..50 {
            for k in 0..6u32 {
                s.step(&unit(t, (k * 7 + round) % 9), &mut arc).unwrap();
                t += 1;
                let p = arc.arc_state().p();
                assert!((0.0..=3.0).contains(&p), "p = {p}");
            }
        }
    }

    #[test]
    fn resident_lists_match_cache() {
        let mut s = Simulator::new(500, SimConfig { time_decisions: false, audit: true }).unwrap();
        let mut arc = ArcPolicy::new(500);
        let mut x = 7u64;
        for t in 0..20_000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let key = ((x >> 33) % 300) as KeyId;
            let size = 1 + (key as u64 * 31) % 60;
            s.step(&Request { ts: t as f64, key, size, ttl: 900.0, origin_rtt: 1.0 }, &mut arc)
                .unwrap();
        }
        let st = arc.arc_state();
        let mut listed: Vec<KeyId> = st.keys(ArcList::T1);
        listed.extend(st.keys(ArcList::T2));
        listed.sort();
        let mut resident: Vec<KeyId> = s.state().iter_lru().map(|e| e.key).collect();
        resident.sort();
        assert_eq!(listed, resident);
        for g in st.keys(ArcList::B1).into_iter().chain(st.keys(ArcList::B2)) {
            assert!(!s.state().contains(g));
        }
    }
}
