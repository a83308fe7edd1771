use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("duration {duration}s is shorter than one burst period ({burst_period}s)")]
    TooShort { duration: f64, burst_period: f64 },
    #[error("bad trace header {0:?}, expected `ts,key,size,ttl,origin_rtt_ms`")]
    Header(String),
    #[error("line {line}, field `{field}`: {reason}")]
    Parse { line: usize, field: &'static str, reason: String },
    #[error("line {line}: timestamp {ts} precedes previous timestamp {prev}")]
    NonMonotonic { line: usize, ts: f64, prev: f64 },
    #[error("line {line}: key {key:?} has size {conflicting}, earlier records say {first}")]
    SizeConflict { line: usize, key: String, first: u64, conflicting: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("policy `{policy}` chose key {key} which is not resident")]
    NonResidentVictim { policy: String, key: u32 },
    #[error("policy `{policy}` returned key {key} twice")]
    DuplicateVictim { policy: String, key: u32 },
    #[error("policy `{policy}` state is out of sync with the cache: {detail}")]
    Desync { policy: String, detail: String },
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("request at ts={ts} precedes simulation clock {now}")]
    ClockRegression { ts: f64, now: f64 },
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit normalization on an empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad magic {0:?}, expected CRLM")]
    BadMagic([u8; 4]),
    #[error("unsupported model file version {0}")]
    Version(u16),
    #[error("model file checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("model file truncated: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no decision samples to train on")]
    EmptyTrajectory,
    #[error("decision {decision} references key {key}, which never appears in the trace")]
    UnknownKey { decision: usize, key: u32 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
