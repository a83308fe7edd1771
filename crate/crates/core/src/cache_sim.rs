//! Byte-capacity, TTL-aware cache simulator.
//!
//! The simulator replays a [`Trace`] against a pluggable [`EvictionPolicy`].
//! Expiry is lazy: an entry past its `expires_at` is dropped when it is next
//! requested, and all expired entries are reclaimed for free at the start of
//! an eviction, before the policy is consulted. Objects larger than the
//! cache bypass it. Every other miss is admitted.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::latency::{nearest_rank, LatencySummary};
use crate::policies::{EvictionPolicy, RemovalReason};
use crate::workload::Trace;

/// Dense key identifier assigned by [`intern`].
pub type KeyId = u32;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub key: KeyId,
    pub size: u64,
    pub inserted_at: f64,
    pub last_access: f64,
    /// Hits during this residency; the admitting miss is not counted.
    pub hit_count: u32,
    pub expires_at: f64,
    /// RTT of the fetch that admitted this residency, in milliseconds.
    pub origin_rtt: f64,
    /// Recency stamp; larger is more recent. Unique across residents.
    pub seq: u64,
}

#[derive(Debug, Clone)]
struct Slot {
    entry: Option<CacheEntry>,
    prev: u32,
    next: u32,
}

impl Default for Slot {
    fn default() -> Self {
        Self { entry: None, prev: NIL, next: NIL }
    }
}

/// Resident objects and their recency order.
///
/// Recency is an intrusive doubly linked list over a slot per key, so
/// touching, admitting, and removing are all O(1) and walking the LRU tail
/// costs only the number of entries visited.
#[derive(Debug, Clone)]
pub struct CacheState {
    capacity: u64,
    used: u64,
    now: f64,
    slots: Vec<Slot>,
    head: u32,
    tail: u32,
    len: usize,
    clock: u64,
    expiry: BinaryHeap<Reverse<(u64, KeyId)>>,
}

impl CacheState {
    pub fn new(capacity: u64) -> Self {
        Self {
            capacity,
            used: 0,
            now: 0.0,
            slots: Vec::new(),
            head: NIL,
            tail: NIL,
            len: 0,
            clock: 0,
            expiry: BinaryHeap::new(),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn free(&self) -> u64 {
        self.capacity - self.used
    }

    /// Simulation clock in seconds.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn set_now(&mut self, now: f64) {
        self.now = now;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, key: KeyId) -> Option<&CacheEntry> {
        self.slots.get(key as usize).and_then(|s| s.entry.as_ref())
    }

    pub fn contains(&self, key: KeyId) -> bool {
        self.get(key).is_some()
    }

    /// Residents from least to most recently used.
    pub fn iter_lru(&self) -> RecencyIter<'_> {
        RecencyIter { state: self, cursor: self.tail, forward: false }
    }

    /// Residents from most to least recently used.
    pub fn iter_mru(&self) -> RecencyIter<'_> {
        RecencyIter { state: self, cursor: self.head, forward: true }
    }

    fn next_seq(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn ensure_slot(&mut self, key: KeyId) {
        let idx = key as usize;
        if idx >= self.slots.len() {
            self.slots.resize_with(idx + 1, Slot::default);
        }
    }

    fn unlink(&mut self, key: KeyId) {
        let (prev, next) = {
            let s = &self.slots[key as usize];
            (s.prev, s.next)
        };
        if prev != NIL {
            self.slots[prev as usize].next = next;
        } else {
            self.head = next;
        }
        if next != NIL {
            self.slots[next as usize].prev = prev;
        } else {
            self.tail = prev;
        }
        let s = &mut self.slots[key as usize];
        s.prev = NIL;
        s.next = NIL;
    }

    fn push_front(&mut self, key: KeyId) {
        let old = self.head;
        {
            let s = &mut self.slots[key as usize];
            s.prev = NIL;
            s.next = old;
        }
        if old != NIL {
            self.slots[old as usize].prev = key;
        } else {
            self.tail = key;
        }
        self.head = key;
    }

    /// Inserts a fresh entry at the most-recently-used position. The caller
    /// guarantees the key is absent and the object fits.
    pub fn admit(&mut self, key: KeyId, size: u64, now: f64, ttl: f64, origin_rtt: f64) {
        debug_assert!(!self.contains(key));
        debug_assert!(self.used + size <= self.capacity);
        self.ensure_slot(key);
        let seq = self.next_seq();
        let expires_at = now + ttl;
        self.slots[key as usize].entry = Some(CacheEntry {
            key,
            size,
            inserted_at: now,
            last_access: now,
            hit_count: 0,
            expires_at,
            origin_rtt,
            seq,
        });
        self.push_front(key);
        self.used += size;
        self.len += 1;
        self.expiry.push(Reverse((expires_at.to_bits(), key)));
    }

    /// Records a hit: bumps the hit count and moves the key to the front.
    pub fn touch(&mut self, key: KeyId, now: f64) {
        let seq = self.next_seq();
        let e = self.slots[key as usize].entry.as_mut().expect("touch of non-resident key");
        e.hit_count += 1;
        e.last_access = now;
        e.seq = seq;
        self.unlink(key);
        self.push_front(key);
    }

    pub fn remove(&mut self, key: KeyId) -> Option<CacheEntry> {
        let entry = self.slots.get_mut(key as usize)?.entry.take()?;
        self.unlink(key);
        self.used -= entry.size;
        self.len -= 1;
        Some(entry)
    }

    /// Removes every entry whose TTL has elapsed at the current clock.
    fn sweep_expired(&mut self) -> Vec<KeyId> {
        let mut out = Vec::new();
        while let Some(&Reverse((bits, key))) = self.expiry.peek() {
            if f64::from_bits(bits) > self.now {
                break;
            }
            self.expiry.pop();
            if self.get(key).is_some_and(|e| e.expires_at.to_bits() == bits) {
                self.remove(key);
                out.push(key);
            }
        }
        out
    }

    /// Verifies the structural invariants; used by tests and audit mode.
    pub fn audit(&self) -> Result<(), String> {
        let mut bytes = 0u64;
        let mut count = 0usize;
        let mut seen = HashSet::new();
        let mut prev_seq = u64::MAX;
        for e in self.iter_mru() {
            if !seen.insert(e.key) {
                return Err(format!("key {} appears twice in recency order", e.key));
            }
            if e.seq >= prev_seq {
                return Err(format!("recency stamps out of order at key {}", e.key));
            }
            prev_seq = e.seq;
            bytes += e.size;
            count += 1;
        }
        let resident = self.slots.iter().filter(|s| s.entry.is_some()).count();
        if count != self.len || resident != self.len {
            return Err(format!("len {} but {count} listed, {resident} resident", self.len));
        }
        if bytes != self.used {
            return Err(format!("used {} but entries sum to {bytes}", self.used));
        }
        if self.used > self.capacity {
            return Err(format!("used {} exceeds capacity {}", self.used, self.capacity));
        }
        Ok(())
    }
}

pub struct RecencyIter<'a> {
    state: &'a CacheState,
    cursor: u32,
    forward: bool,
}

impl<'a> Iterator for RecencyIter<'a> {
    type Item = &'a CacheEntry;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor == NIL {
            return None;
        }
        let slot = &self.state.slots[self.cursor as usize];
        self.cursor = if self.forward { slot.next } else { slot.prev };
        slot.entry.as_ref()
    }
}

// ---------------------------------------------------------------------------
// Interned traces
// ---------------------------------------------------------------------------

/// A request with its key replaced by a dense id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub ts: f64,
    pub key: KeyId,
    pub size: u64,
    pub ttl: f64,
    pub origin_rtt: f64,
}

#[derive(Debug, Clone, Default)]
pub struct InternedTrace {
    pub requests: Vec<Request>,
    /// Key names indexed by id.
    pub names: Vec<String>,
}

impl InternedTrace {
    pub fn n_keys(&self) -> usize {
        self.names.len()
    }
}

/// Assigns key ids in order of first appearance.
pub fn intern(trace: &Trace) -> InternedTrace {
    let mut ids: HashMap<&str, KeyId> = HashMap::new();
    let mut names = Vec::new();
    let requests = trace
        .records
        .iter()
        .map(|r| {
            let key = *ids.entry(r.key.as_str()).or_insert_with(|| {
                names.push(r.key.clone());
                (names.len() - 1) as KeyId
            });
            Request { ts: r.ts, key, size: r.size, ttl: r.ttl, origin_rtt: r.origin_rtt }
        })
        .collect();
    InternedTrace { requests, names }
}

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Hit,
    Miss,
    /// The entry was present but past its TTL; counted as a miss.
    ExpiredMiss,
}

impl StepOutcome {
    pub fn is_hit(self) -> bool {
        self == StepOutcome::Hit
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvictionOutcome {
    /// Keys evicted by the policy and any LRU top-up, in eviction order.
    pub victims: Vec<KeyId>,
    /// Expired entries reclaimed before the policy was consulted.
    pub expired: Vec<KeyId>,
    /// Whether the policy was consulted.
    pub decision: bool,
    /// The decision was a fallback or needed an LRU top-up.
    pub fallback: bool,
    /// The policy's own victims were insufficient and native LRU filled the gap.
    pub partial_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Measure wall-clock time around every policy decision.
    pub time_decisions: bool,
    /// Check the state invariants after every step.
    pub audit: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { time_decisions: true, audit: false }
    }
}

/// Aggregate replay metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub capacity: u64,
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub expired_hits: u64,
    pub hit_ratio: f64,
    pub byte_hit_ratio: f64,
    pub requested_bytes: u64,
    pub origin_bytes: u64,
    pub evictions: u64,
    pub eviction_events: u64,
    pub fallback_events: u64,
    pub partial_fallback_events: u64,
    pub bypassed: u64,
    pub decision_latency: LatencySummary,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for SimReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, String); 15] = [
            ("policy", self.policy.clone()),
            ("capacity", self.capacity.to_string()),
            ("requests", self.requests.to_string()),
            ("hits", self.hits.to_string()),
            ("misses", self.misses.to_string()),
            ("expired_hits", self.expired_hits.to_string()),
            ("hit_ratio", format!("{:.4}", self.hit_ratio)),
            ("byte_hit_ratio", format!("{:.4}", self.byte_hit_ratio)),
            ("origin_bytes", self.origin_bytes.to_string()),
            ("evictions", self.evictions.to_string()),
            ("eviction_events", self.eviction_events.to_string()),
            ("fallback_events", self.fallback_events.to_string()),
            ("latency_p50_us", format!("{:.1}", self.decision_latency.p50)),
            ("latency_p95_us", format!("{:.1}", self.decision_latency.p95)),
            ("latency_p99_us", format!("{:.1}", self.decision_latency.p99)),
        ];
        for (name, value) in rows {
            writeln!(f, "{name:<18} {value:>16}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Counters {
    requests: u64,
    hits: u64,
    misses: u64,
    expired_hits: u64,
    requested_bytes: u64,
    hit_bytes: u64,
    evictions: u64,
    eviction_events: u64,
    fallback_events: u64,
    partial_fallback_events: u64,
    bypassed: u64,
}

/// One replay in progress.
pub struct Simulator {
    state: CacheState,
    config: SimConfig,
    counters: Counters,
    latencies_us: Vec<f64>,
}

impl Simulator {
    pub fn new(capacity: u64, config: SimConfig) -> Result<Self, SimError> {
        if capacity == 0 {
            return Err(SimError::ZeroCapacity);
        }
        Ok(Self {
            state: CacheState::new(capacity),
            config,
            counters: Counters::default(),
            latencies_us: Vec::new(),
        })
    }

    pub fn state(&self) -> &CacheState {
        &self.state
    }

    /// Mutable access for building test fixtures.
    pub fn state_mut(&mut self) -> &mut CacheState {
        &mut self.state
    }

    /// Serves one request.
    pub fn step(
        &mut self,
        req: &Request,
        policy: &mut dyn EvictionPolicy,
    ) -> Result<StepOutcome, SimError> {
        if req.ts < self.state.now {
            return Err(SimError::ClockRegression { ts: req.ts, now: self.state.now });
        }
        self.state.now = req.ts;
        self.counters.requests += 1;
        self.counters.requested_bytes += req.size;

        let mut outcome = StepOutcome::Miss;
        if let Some(e) = self.state.get(req.key) {
            if self.state.now >= e.expires_at {
                self.state.remove(req.key);
                policy.on_remove(req.key, RemovalReason::Expired)?;
                outcome = StepOutcome::ExpiredMiss;
            } else {
                outcome = StepOutcome::Hit;
            }
        }

        match outcome {
            StepOutcome::Hit => {
                self.state.touch(req.key, req.ts);
                policy.on_hit(&self.state, req.key)?;
                self.counters.hits += 1;
                self.counters.hit_bytes += req.size;
            }
            StepOutcome::Miss | StepOutcome::ExpiredMiss => {
                self.counters.misses += 1;
                if outcome == StepOutcome::ExpiredMiss {
                    self.counters.expired_hits += 1;
                }
                if req.size > self.state.capacity {
                    self.counters.bypassed += 1;
                } else {
                    policy.on_miss(&self.state, req.key, req.size)?;
                    self.ensure_space(req.size, policy)?;
                    self.state.admit(req.key, req.size, req.ts, req.ttl, req.origin_rtt);
                    policy.on_admit(&self.state, req.key)?;
                }
            }
        }

        if self.config.audit {
            if let Err(detail) = self.state.audit() {
                panic!("cache state audit failed after ts={}: {detail}", req.ts);
            }
        }
        Ok(outcome)
    }

    /// Frees space until an object of `needed` bytes fits.
    pub fn ensure_space(
        &mut self,
        needed: u64,
        policy: &mut dyn EvictionPolicy,
    ) -> Result<EvictionOutcome, SimError> {
        let mut out = EvictionOutcome::default();
        if self.state.used + needed <= self.state.capacity {
            return Ok(out);
        }
        for key in self.state.sweep_expired() {
            policy.on_remove(key, RemovalReason::Expired)?;
            out.expired.push(key);
        }
        if self.state.used + needed <= self.state.capacity {
            return Ok(out);
        }
        let shortfall = self.state.used + needed - self.state.capacity;

        let started = self.config.time_decisions.then(std::time::Instant::now);
        let selection = policy.select_victims(&self.state, shortfall)?;
        if let Some(t0) = started {
            self.latencies_us.push(t0.elapsed().as_secs_f64() * 1e6);
        }
        out.decision = true;
        out.fallback = selection.fallback;

        let mut chosen = HashSet::with_capacity(selection.victims.len());
        for &key in &selection.victims {
            if !chosen.insert(key) {
                return Err(SimError::DuplicateVictim { policy: policy.name().to_string(), key });
            }
            if self.state.remove(key).is_none() {
                return Err(SimError::NonResidentVictim { policy: policy.name().to_string(), key });
            }
            policy.on_remove(key, RemovalReason::Evicted)?;
            out.victims.push(key);
        }

        while self.state.used + needed > self.state.capacity {
            let key = self.state.tail;
            debug_assert_ne!(key, NIL, "object fits in an empty cache");
            self.state.remove(key);
            policy.on_remove(key, RemovalReason::Evicted)?;
            out.victims.push(key);
            out.partial_fallback = true;
        }
        if out.partial_fallback {
            out.fallback = true;
            self.counters.partial_fallback_events += 1;
        }
        self.counters.eviction_events += 1;
        self.counters.evictions += out.victims.len() as u64;
        if out.fallback {
            self.counters.fallback_events += 1;
        }
        Ok(out)
    }

    pub fn report(&self, policy: &str) -> SimReport {
        let c = &self.counters;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mut lat = self.latencies_us.clone();
        lat.sort_by(f64::total_cmp);
        SimReport {
            policy: policy.to_string(),
            capacity: self.state.capacity,
            requests: c.requests,
            hits: c.hits,
            misses: c.misses,
            expired_hits: c.expired_hits,
            hit_ratio: ratio(c.hits, c.requests),
            byte_hit_ratio: ratio(c.hit_bytes, c.requested_bytes),
            requested_bytes: c.requested_bytes,
            origin_bytes: c.requested_bytes - c.hit_bytes,
            evictions: c.evictions,
            eviction_events: c.eviction_events,
            fallback_events: c.fallback_events,
            partial_fallback_events: c.partial_fallback_events,
            bypassed: c.bypassed,
            decision_latency: if lat.is_empty() {
                LatencySummary::default()
            } else {
                LatencySummary {
                    p50: nearest_rank(&lat, 50.0),
                    p95: nearest_rank(&lat, 95.0),
                    p99: nearest_rank(&lat, 99.0),
                }
            },
        }
    }
}

/// Replays a whole interned trace.
pub fn replay_interned(
    trace: &InternedTrace,
    capacity: u64,
    policy: &mut dyn EvictionPolicy,
    config: SimConfig,
) -> Result<SimReport, SimError> {
    let mut sim = Simulator::new(capacity, config)?;
    for req in &trace.requests {
        sim.step(req, policy)?;
    }
    Ok(sim.report(policy.name()))
}

/// Replays `trace` from an empty cache of `capacity` bytes.
pub fn replay(
    trace: &Trace,
    capacity: u64,
    policy: &mut dyn EvictionPolicy,
    config: SimConfig,
) -> Result<SimReport, SimError> {
    replay_interned(&intern(trace), capacity, policy, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{LruPolicy, Selection};
    use crate::workload::{RequestRecord, TraceMeta};

    fn req(ts: f64, key: KeyId, size: u64, ttl: f64) -> Request {
        Request { ts, key, size, ttl, origin_rtt: 1.0 }
    }

    fn sim(cap: u64) -> Simulator {
        Simulator::new(cap, SimConfig { time_decisions: false, audit: true }).unwrap()
    }

    #[test]
    fn a_b_a_with_two_slots() {
        let mut s = sim(2);
        let mut lru = LruPolicy;
        let outs: Vec<_> = [0, 1, 0]
            .iter()
            .enumerate()
            .map(|(i, &k)| s.step(&req(i as f64, k, 1, 100.0), &mut lru).unwrap())
            .collect();
        assert_eq!(outs, [StepOutcome::Miss, StepOutcome::Miss, StepOutcome::Hit]);
    }

    #[test]
    fn expiry_readmits() {
        let mut s = sim(10);
        let mut lru = LruPolicy;
        assert_eq!(s.step(&req(0.0, 0, 1, 10.0), &mut lru).unwrap(), StepOutcome::Miss);
        assert_eq!(s.step(&req(11.0, 0, 1, 10.0), &mut lru).unwrap(), StepOutcome::ExpiredMiss);
        let e = s.state().get(0).unwrap();
        assert_eq!(e.expires_at, 21.0);
        assert_eq!(e.hit_count, 0);
        let r = s.report("lru");
        assert_eq!((r.hits, r.misses, r.expired_hits), (0, 2, 1));
    }

    #[test]
    fn request_at_expiry_instant_is_not_a_hit() {
        let mut s = sim(10);
        let mut lru = LruPolicy;
        s.step(&req(0.0, 0, 1, 10.0), &mut lru).unwrap();
        assert_eq!(s.step(&req(10.0, 0, 1, 10.0), &mut lru).unwrap(), StepOutcome::ExpiredMiss);
    }

    #[test]
    fn oversized_objects_bypass() {
        let mut s = sim(10);
        let mut lru = LruPolicy;
        s.step(&req(0.0, 0, 5, 100.0), &mut lru).unwrap();
        s.step(&req(1.0, 1, 11, 100.0), &mut lru).unwrap();
        assert!(s.state().contains(0));
        assert!(!s.state().contains(1));
        let r = s.report("lru");
        assert_eq!((r.bypassed, r.eviction_events, r.evictions), (1, 0, 0));
    }

    #[test]
    fn no_eviction_when_space_is_free() {
        let mut s = sim(10);
        let mut lru = LruPolicy;
        s.step(&req(0.0, 0, 4, 100.0), &mut lru).unwrap();
        let out = s.ensure_space(6, &mut lru).unwrap();
        assert_eq!(out, EvictionOutcome::default());
    }

    #[test]
    fn lru_evicts_tail() {
        let mut s = sim(3);
        let mut lru = LruPolicy;
        for (i, k) in [0, 1, 2, 0].into_iter().enumerate() {
            s.step(&req(i as f64, k, 1, 100.0), &mut lru).unwrap();
        }
        let out = s.ensure_space(1, &mut lru).unwrap();
        assert_eq!(out.victims, vec![1]);
        assert!(out.decision && !out.fallback);
    }

    #[test]
    fn expired_entries_are_reclaimed_before_deciding() {
        let mut s = sim(3);
        let mut lru = LruPolicy;
        s.step(&req(0.0, 0, 1, 100.0), &mut lru).unwrap();
        s.step(&req(0.0, 1, 1, 5.0), &mut lru).unwrap();
        s.step(&req(0.0, 2, 1, 100.0), &mut lru).unwrap();
        s.step(&req(6.0, 3, 1, 100.0), &mut lru).unwrap();
        assert!(s.state().contains(0) && !s.state().contains(1));
        assert_eq!(s.report("lru").eviction_events, 0);
    }

    struct ShortPolicy;
    impl EvictionPolicy for ShortPolicy {
        fn name(&self) -> &str {
            "short"
        }
        fn select_victims(&mut self, state: &CacheState, _needed: u64) -> Result<Selection, SimError> {
            // one candidate only, even when more is needed
            Ok(Selection::new(vec![state.iter_lru().nth(1).unwrap().key]))
        }
    }

    #[test]
    fn insufficient_victims_are_topped_up_by_lru() {
        let mut s = sim(4);
        let mut p = ShortPolicy;
        for k in 0..4 {
            s.step(&req(k as f64, k, 1, 100.0), &mut p).unwrap();
        }
        let out = s.ensure_space(2, &mut p).unwrap();
        assert_eq!(out.victims, vec![1, 0]);
        assert!(out.partial_fallback && out.fallback);
        let r = s.report("short");
        assert_eq!((r.evictions, r.eviction_events, r.partial_fallback_events), (2, 1, 1));
        assert_eq!(r.fallback_events, 1);
    }

    struct Rogue(KeyId);
    impl EvictionPolicy for Rogue {
        fn name(&self) -> &str {
            "rogue"
        }
        fn select_victims(&mut self, _: &CacheState, _: u64) -> Result<Selection, SimError> {
            Ok(Selection::new(vec![self.0]))
        }
    }

    #[test]
    fn non_resident_victim_aborts() {
        let mut s = sim(1);
        let mut p = Rogue(42);
        s.step(&req(0.0, 0, 1, 100.0), &mut p).unwrap();
        assert!(matches!(
            s.step(&req(1.0, 1, 1, 100.0), &mut p),
            Err(SimError::NonResidentVictim { key: 42, .. })
        ));
    }

    #[test]
    fn compulsory_misses_only_when_everything_fits() {
        let records = (0..200)
            .map(|i| RequestRecord {
                ts: i as f64,
                key: format!("k{}", i % 17),
                size: 10 + (i % 17) as u64,
                ttl: 1e6,
                origin_rtt: 1.0,
            })
            .collect();
        let trace = Trace { records, meta: TraceMeta::default() };
        let ws = crate::workload::working_set_bytes(&trace);
        let r = replay(&trace, ws, &mut LruPolicy, SimConfig::default()).unwrap();
        assert_eq!(r.misses, 17);
        assert_eq!(r.hits + r.misses, r.requests);
        assert_eq!(r.eviction_events, 0);
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(matches!(Simulator::new(0, SimConfig::default()), Err(SimError::ZeroCapacity)));
    }
}
