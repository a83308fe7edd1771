//! Cache-eviction lab: a TTL-aware byte-capacity cache simulator, classical
//! eviction baselines, a dueling-DQN policy over the K coldest residents,
//! and a deadline-bounded decision sidecar with LRU fallback.

pub mod cache_sim;
pub mod dqn;
pub mod error;
pub mod features;
pub mod latency;
pub mod policies;
pub mod sidecar;
pub mod workload;

pub use cache_sim::{replay, CacheEntry, CacheState, SimConfig, SimReport, Simulator, StepOutcome};
pub use error::{FeatureError, ModelError, SimError, WorkloadError};
pub use policies::{EvictionPolicy, PolicyKind};
pub use workload::{RequestRecord, Trace, TrapParams, ZipfParams};
