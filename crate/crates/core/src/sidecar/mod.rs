//! Out-of-process inference: the wire protocol, a Unix-socket server, and a
//! deadline-bounded client that falls back to LRU on any failure.

pub mod breaker;
#[cfg(unix)]
mod client;
pub mod protocol;
#[cfg(unix)]
mod server;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use breaker::{Breaker, BreakerState, Clock, ManualClock, SystemClock};
#[cfg(unix)]
pub use client::{lru_mask, SidecarClient, SidecarPolicy};
pub use protocol::{EvictRequest, EvictResponse, ProtocolError, Status};
#[cfg(unix)]
pub use server::{request_swap, Server, ServerHandle, ServerStats};

use crate::cache_sim::KeyId;
use crate::latency::nearest_rank;

pub const DEFAULT_DEADLINE_US: u64 = 500;
pub const DEFAULT_SOCKET: &str = "/tmp/coldrl.sock";
/// Environment variable naming the socket for both server and clients.
pub const SOCKET_ENV: &str = "COLDRL_SOCKET";

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("invalid client configuration: {0}")]
    Config(String),
    #[error("latency report needs at least one decision")]
    NoDecisions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Active,
    Shadow,
    Off,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "active" => Ok(Mode::Active),
            "shadow" => Ok(Mode::Shadow),
            "off" => Ok(Mode::Off),
            _ => Err(format!("unknown mode `{s}` (active|shadow|off)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub socket: PathBuf,
    pub deadline_us: u64,
    pub breaker_threshold: u32,
    pub breaker_cooldown: Duration,
    pub mode: Mode,
    pub rollout_percent: u8,
    /// Mixed into the per-event rollout lottery.
    pub rollout_seed: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            socket: PathBuf::from(DEFAULT_SOCKET),
            deadline_us: DEFAULT_DEADLINE_US,
            breaker_threshold: 5,
            breaker_cooldown: Duration::from_secs(10),
            mode: Mode::Active,
            rollout_percent: 100,
            rollout_seed: 0,
        }
    }
}

impl ClientConfig {
    pub fn with_socket(socket: impl Into<PathBuf>) -> Self {
        Self { socket: socket.into(), ..Self::default() }
    }

    pub fn deadline(&self) -> Duration {
        Duration::from_micros(self.deadline_us)
    }

    pub fn validate(&self) -> Result<(), SidecarError> {
        if self.deadline_us == 0 {
            return Err(SidecarError::Config("deadline must be positive".into()));
        }
        if self.rollout_percent > 100 {
            return Err(SidecarError::Config(format!("rollout_percent {} exceeds 100", self.rollout_percent)));
        }
        if self.breaker_threshold == 0 {
            return Err(SidecarError::Config("breaker threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Learned,
    FallbackTimeout,
    FallbackError,
    FallbackBreaker,
    FallbackRollout,
    Shadow,
}

impl DecisionSource {
    pub const ALL: [DecisionSource; 6] = [
        DecisionSource::Learned,
        DecisionSource::FallbackTimeout,
        DecisionSource::FallbackError,
        DecisionSource::FallbackBreaker,
        DecisionSource::FallbackRollout,
        DecisionSource::Shadow,
    ];

    pub fn is_fallback(self) -> bool {
        !matches!(self, DecisionSource::Learned | DecisionSource::Shadow)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionSource::Learned => "learned",
            DecisionSource::FallbackTimeout => "fallback_timeout",
            DecisionSource::FallbackError => "fallback_error",
            DecisionSource::FallbackBreaker => "fallback_breaker",
            DecisionSource::FallbackRollout => "fallback_rollout",
            DecisionSource::Shadow => "shadow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Keys to evict, coldest first. Only the learned source applies the
    /// model's mask; every other source is the LRU prefix.
    pub victims: Vec<KeyId>,
    pub source: DecisionSource,
    pub latency_us: f64,
    /// The mask the server returned, applied or not.
    pub learned_mask: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub decisions: usize,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    pub mean_us: f64,
    pub fallback_rate: f64,
    /// Count per source, in [`DecisionSource::ALL`] order.
    pub by_source: Vec<(DecisionSource, usize)>,
}

/// Nearest-rank percentiles of decision latency, and the fraction of
/// fallback decisions.
pub fn latency_report(decisions: &[Decision]) -> Result<LatencyReport, SidecarError> {
    if decisions.is_empty() {
        return Err(SidecarError::NoDecisions);
    }
    let mut lat: Vec<f64> = decisions.iter().map(|d| d.latency_us).collect();
    lat.sort_by(f64::total_cmp);
    let n = decisions.len();
    let fallbacks = decisions.iter().filter(|d| d.source.is_fallback()).count();
    Ok(LatencyReport {
        decisions: n,
        p50_us: nearest_rank(&lat, 50.0),
        p95_us: nearest_rank(&lat, 95.0),
        p99_us: nearest_rank(&lat, 99.0),
        mean_us: lat.iter().sum::<f64>() / n as f64,
        fallback_rate: fallbacks as f64 / n as f64,
        by_source: DecisionSource::ALL
            .iter()
            .map(|&s| (s, decisions.iter().filter(|d| d.source == s).count()))
            .collect(),
    })
}
