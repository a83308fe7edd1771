//! Deadline-bounded client and the sidecar-backed eviction policy.

use std::io::{self, ErrorKind, Read, Write};
use std::os::fd::AsRawFd;
use std::os::unix::net::UnixStream;
use std::sync::Arc;
use std::time::Instant;

use super::breaker::{Breaker, BreakerState, Clock, SystemClock};
use super::protocol::{decode_response, encode_request_into, Status, MAX_REQUEST_LEN, RESPONSE_LEN};
use super::{ClientConfig, Decision, DecisionSource, Mode, SidecarError};
use crate::cache_sim::{CacheState, KeyId};
use crate::dqn::{candidate_rows, mask_indices, MAX_K};
use crate::error::SimError;
use crate::features::NormParams;
use crate::policies::{k_tail_candidates, Candidate, EvictionPolicy, Selection};

enum Failure {
    Timeout,
    Error,
}

fn classify(e: io::Error) -> Failure {
    match e.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => Failure::Timeout,
        _ => Failure::Error,
    }
}

/// Blocks until `conn` is ready for `events` or `deadline` passes. Socket
/// timeouts are tick-granular on Linux, so this uses `ppoll` instead.
fn wait(conn: &UnixStream, events: libc::c_short, deadline: Instant) -> Result<(), Failure> {
    loop {
        let left = deadline.checked_duration_since(Instant::now()).filter(|d| !d.is_zero()).ok_or(Failure::Timeout)?;
        let ts = libc::timespec { tv_sec: left.as_secs() as libc::time_t, tv_nsec: left.subsec_nanos() as libc::c_long };
        let mut pfd = libc::pollfd { fd: conn.as_raw_fd(), events, revents: 0 };
        // SAFETY: one valid pollfd and a valid timespec; no signal mask.
        let rc = unsafe { libc::ppoll(&mut pfd, 1, &ts, std::ptr::null()) };
        match rc {
            1.. => return Ok(()),
            0 => return Err(Failure::Timeout),
            _ if io::Error::last_os_error().kind() == ErrorKind::Interrupted => {}
            _ => return Err(Failure::Error),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mask of the coldest-first prefix covering `needed`, or every candidate.
pub fn lru_mask(sizes: &[u64], needed: u64) -> u64 {
    let mut mask = 0u64;
    let mut freed = 0u64;
    for (i, &s) in sizes.iter().enumerate() {
        if freed >= needed {
            break;
        }
        mask |= 1 << i;
        freed += s;
    }
    mask
}

/// Adds unselected candidates, coldest first, until `needed` is covered.
fn top_up(mut mask: u64, sizes: &[u64], needed: u64) -> u64 {
    let mut freed: u64 = mask_indices(mask).map(|i| sizes[i]).sum();
    for (i, &s) in sizes.iter().enumerate() {
        if freed >= needed {
            break;
        }
        if mask & (1 << i) == 0 {
            mask |= 1 << i;
            freed += s;
        }
    }
    mask
}

pub struct SidecarClient {
    cfg: ClientConfig,
    norm: NormParams,
    breaker: Breaker,
    clock: Arc<dyn Clock>,
    conn: Option<UnixStream>,
    events: u64,
    buf: Vec<u8>,
    rows: Vec<f32>,
}

impl SidecarClient {
    /// `norm` must be the serving model's normalization constants.
    pub fn new(cfg: ClientConfig, norm: NormParams) -> Result<Self, SidecarError> {
        Self::with_clock(cfg, norm, Arc::new(SystemClock::default()))
    }

    pub fn with_clock(cfg: ClientConfig, norm: NormParams, clock: Arc<dyn Clock>) -> Result<Self, SidecarError> {
        cfg.validate()?;
        Ok(Self {
            breaker: Breaker::new(cfg.breaker_threshold, cfg.breaker_cooldown),
            cfg,
            norm,
            clock,
            conn: None,
            events: 0,
            buf: Vec::with_capacity(MAX_REQUEST_LEN),
            rows: Vec::with_capacity(MAX_REQUEST_LEN / 4),
        })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.cfg
    }

    pub fn breaker_state(&self) -> BreakerState {
        self.breaker.state()
    }

    /// Decides victims among `cands` (coldest first) for `needed` bytes.
    pub fn decide(&mut self, cands: &[Candidate], needed: u64) -> Decision {
        let started = Instant::now();
        let mut rows = std::mem::take(&mut self.rows);
        candidate_rows(cands, &self.norm, &mut rows);
        let sizes: Vec<u64> = cands.iter().map(|c| c.size).collect();
        let (source, mask, learned_mask) = self.decide_mask(&sizes, &rows, needed);
        self.rows = rows;
        let victims = mask_indices(mask).take_while(|&i| i < cands.len()).map(|i| cands[i].key).collect();
        Decision { victims, source, latency_us: started.elapsed().as_secs_f64() * 1e6, learned_mask }
    }

    /// Like [`decide`](Self::decide) over pre-normalized rows; victims are
    /// candidate indices.
    pub fn decide_rows(&mut self, sizes: &[u64], rows: &[f32], needed: u64) -> Decision {
        let started = Instant::now();
        let (source, mask, learned_mask) = self.decide_mask(sizes, rows, needed);
        let victims = mask_indices(mask).take_while(|&i| i < sizes.len()).map(|i| i as KeyId).collect();
        Decision { victims, source, latency_us: started.elapsed().as_secs_f64() * 1e6, learned_mask }
    }

    /// Returns the source, the applied mask, and the learned mask if one
    /// was received.
    fn decide_mask(&mut self, sizes: &[u64], rows: &[f32], needed: u64) -> (DecisionSource, u64, Option<u64>) {
        let event = self.events;
        self.events += 1;
        let lru = lru_mask(sizes, needed);
        if sizes.is_empty() || sizes.len() > MAX_K {
            return (DecisionSource::FallbackError, lru, None);
        }
        let included = splitmix64(self.cfg.rollout_seed ^ event) % 100 < self.cfg.rollout_percent as u64;
        if self.cfg.mode == Mode::Off || !included {
            return (DecisionSource::FallbackRollout, lru, None);
        }
        if !self.breaker.admit(self.clock.now()) {
            return (DecisionSource::FallbackBreaker, lru, None);
        }
        let deadline = Instant::now() + self.cfg.deadline();
        let shadow = self.cfg.mode == Mode::Shadow;
        match self.exchange(rows, needed, shadow, sizes.len(), deadline) {
            Ok(mask) => {
                self.breaker.record_success();
                if shadow {
                    (DecisionSource::Shadow, lru, Some(mask))
                } else {
                    (DecisionSource::Learned, top_up(mask, sizes, needed), Some(mask))
                }
            }
            Err(f) => {
                self.breaker.record_failure(self.clock.now());
                let source = match f {
                    Failure::Timeout => DecisionSource::FallbackTimeout,
                    Failure::Error => DecisionSource::FallbackError,
                };
                (source, lru, None)
            }
        }
    }

    fn exchange(&mut self, rows: &[f32], needed: u64, shadow: bool, k: usize, deadline: Instant) -> Result<u64, Failure> {
        if encode_request_into(needed, rows, shadow, &mut self.buf).is_err() {
            return Err(Failure::Error);
        }
        let mut conn = match self.conn.take() {
            Some(c) => c,
            None => {
                let c = UnixStream::connect(&self.cfg.socket).map_err(classify)?;
                c.set_nonblocking(true).map_err(classify)?;
                c
            }
        };
        let mut sent = 0;
        while sent < self.buf.len() {
            match conn.write(&self.buf[sent..]) {
                Ok(0) => return Err(Failure::Error),
                Ok(n) => sent += n,
                Err(e) if e.kind() == ErrorKind::WouldBlock => wait(&conn, libc::POLLOUT, deadline)?,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(classify(e)),
            }
        }
        let mut resp = [0u8; RESPONSE_LEN];
        let mut filled = 0;
        while filled < RESPONSE_LEN {
            match conn.read(&mut resp[filled..]) {
                Ok(0) => return Err(Failure::Error),
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::WouldBlock => wait(&conn, libc::POLLIN, deadline)?,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(classify(e)),
            }
        }
        let resp = decode_response(&resp, Some(k)).map_err(|_| Failure::Error)?;
        // the stream is still in sync even when the server declined
        self.conn = Some(conn);
        match resp.status {
            Status::Ok => Ok(resp.mask),
            _ => Err(Failure::Error),
        }
    }
}

/// Eviction through the sidecar (`sidecar`). Records every decision without
/// its victim list.
pub struct SidecarPolicy {
    client: SidecarClient,
    k: usize,
    log: Vec<Decision>,
}

impl SidecarPolicy {
    pub fn new(client: SidecarClient, k: usize) -> Self {
        assert!((1..=MAX_K).contains(&k), "K must be in 1..=64");
        Self { client, k, log: Vec::new() }
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.log
    }

    pub fn client(&self) -> &SidecarClient {
        &self.client
    }
}

impl EvictionPolicy for SidecarPolicy {
    fn name(&self) -> &str {
        "sidecar"
    }

    fn select_victims(&mut self, state: &CacheState, needed: u64) -> Result<Selection, SimError> {
        let cands = k_tail_candidates(state, self.k);
        if cands.is_empty() {
            return Ok(Selection::fallback(Vec::new()));
        }
        let mut d = self.client.decide(&cands, needed);
        let victims = std::mem::take(&mut d.victims);
        let fallback = d.source != DecisionSource::Learned;
        self.log.push(d);
        Ok(Selection { victims, fallback })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lru_mask_is_covering_prefix() {
        assert_eq!(lru_mask(&[3, 3, 3], 4), 0b011);
        assert_eq!(lru_mask(&[3, 3, 3], 100), 0b111);
        assert_eq!(lru_mask(&[3, 3, 3], 0), 0);
    }

    #[test]
    fn top_up_adds_coldest_unselected() {
        assert_eq!(top_up(0b100, &[1, 1, 1, 5], 2), 0b101);
        assert_eq!(top_up(0b1000, &[1, 1, 1, 5], 2), 0b1000);
    }
}
