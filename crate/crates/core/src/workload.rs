//! Request traces: synthetic generators and the CSV trace format.
//!
//! Every generator is a pure function of its parameters and seed. Randomness
//! comes from [`ChaCha8Rng`], a portable counter-based generator, so the same
//! `(params, seed)` pair yields byte-identical traces on every platform.
//!
//! CSV schema (UTF-8, header first):
//!
//! ```text
//! ts,key,size,ttl,origin_rtt_ms
//! 0.000000000,k17,20480,14400.000000000,12.500000000
//! ```

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::WorkloadError;

/// Header line of the trace CSV format.
pub const CSV_HEADER: &str = "ts,key,size,ttl,origin_rtt_ms";

/// Arrival rate of [`gen_zipf`] traces (requests per second, evenly spaced).
pub const ZIPF_REQUEST_RATE: f64 = 100.0;

const KIB: u64 = 1024;
const MIB: u64 = 1024 * 1024;

/// One logged or synthetic request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    /// Seconds since trace start.
    pub ts: f64,
    pub key: String,
    /// Object size in bytes.
    pub size: u64,
    /// Time-to-live in seconds granted by this response.
    pub ttl: f64,
    /// Origin round-trip time in milliseconds.
    pub origin_rtt: f64,
}

/// Provenance of a trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    pub generator: String,
    pub seed: Option<u64>,
    /// Parameter snapshot as ordered `name=value` pairs.
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<RequestRecord>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of distinct keys.
    pub fn distinct_keys(&self) -> usize {
        self.records.iter().map(|r| r.key.as_str()).collect::<HashSet<_>>().len()
    }

    /// Checks the trace invariants: valid record fields, non-decreasing
    /// timestamps, and one size per key.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let mut sizes: HashMap<&str, u64> = HashMap::new();
        let mut prev = 0.0f64;
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 2;
            validate_record(r, line)?;
            if r.ts < prev {
                return Err(WorkloadError::NonMonotonic { line, ts: r.ts, prev });
            }
            prev = r.ts;
            match sizes.get(r.key.as_str()) {
                Some(&s) if s != r.size => {
                    return Err(WorkloadError::SizeConflict {
                        line,
                        key: r.key.clone(),
                        first: s,
                        conflicting: r.size,
                    })
                }
                Some(_) => {}
                None => {
                    sizes.insert(&r.key, r.size);
                }
            }
        }
        Ok(())
    }
}

fn validate_record(r: &RequestRecord, line: usize) -> Result<(), WorkloadError> {
    let bad = |field: &'static str, reason: String| WorkloadError::Parse { line, field, reason };
    if !(r.ts.is_finite() && r.ts >= 0.0) {
        return Err(bad("ts", format!("must be a non-negative number, got {}", r.ts)));
    }
    if r.key.is_empty() || r.key.contains([',', '\n', '\r']) {
        return Err(bad("key", "must be non-empty and free of commas and newlines".into()));
    }
    if r.size == 0 {
        return Err(bad("size", "must be at least 1 byte".into()));
    }
    if !(r.ttl.is_finite() && r.ttl > 0.0) {
        return Err(bad("ttl", format!("must be positive, got {}", r.ttl)));
    }
    if !(r.origin_rtt.is_finite() && r.origin_rtt >= 0.0) {
        return Err(bad("origin_rtt_ms", format!("must be non-negative, got {}", r.origin_rtt)));
    }
    Ok(())
}

/// Sum of object sizes over distinct keys.
pub fn working_set_bytes(trace: &Trace) -> u64 {
    let mut seen = HashSet::new();
    trace
        .records
        .iter()
        .filter(|r| seen.insert(r.key.as_str()))
        .map(|r| r.size)
        .sum()
}

// ---------------------------------------------------------------------------
// Zipf workloads
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipfParams {
    pub n_keys: usize,
    pub n_requests: usize,
    /// Skew exponent; 0 is uniform.
    pub alpha: f64,
    /// Per-key sizes are log-uniform on `[size_min, size_max]`.
    pub size_min: u64,
    pub size_max: u64,
    pub ttl: f64,
}

impl Default for ZipfParams {
    fn default() -> Self {
        Self {
            n_keys: 10_000,
            n_requests: 200_000,
            alpha: 0.8,
            size_min: KIB,
            size_max: MIB,
            ttl: 600.0,
        }
    }
}

impl ZipfParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let invalid = |name: &'static str, reason: &str| WorkloadError::InvalidParam {
            name,
            reason: reason.to_string(),
        };
        if self.n_keys == 0 {
            return Err(invalid("n_keys", "must be at least 1"));
        }
        if self.n_requests == 0 {
            return Err(invalid("n_requests", "must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid("alpha", "must be a finite number >= 0"));
        }
        if self.size_min == 0 || self.size_max < self.size_min {
            return Err(invalid("size", "need 1 <= size_min <= size_max"));
        }
        if !(self.ttl.is_finite() && self.ttl > 0.0) {
            return Err(invalid("ttl", "must be positive"));
        }
        Ok(())
    }

    fn snapshot(&self) -> Vec<(String, String)> {
        vec![
            ("n_keys".into(), self.n_keys.to_string()),
            ("n_requests".into(), self.n_requests.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("size_min".into(), self.size_min.to_string()),
            ("size_max".into(), self.size_max.to_string()),
            ("ttl".into(), self.ttl.to_string()),
        ]
    }
}

/// Inverse-CDF sampler for a truncated Zipf law over ranks `1..=n`.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(n: usize, alpha: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf = Vec::with_capacity(n);
        for rank in 1..=n {
            acc += (rank as f64).powf(-alpha);
            cdf.push(acc);
        }
        Self { cdf }
    }

    /// Probability mass of `rank` (1-based).
    pub fn pmf(&self, rank: usize) -> f64 {
        let total = *self.cdf.last().unwrap();
        let lo = if rank >= 2 { self.cdf[rank - 2] } else { 0.0 };
        (self.cdf[rank - 1] - lo) / total
    }

    /// Draws a 0-based rank index.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    if lo == hi {
        return lo;
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let v = (a + rng.random::<f64>() * (b - a)).exp().round() as u64;
    v.clamp(lo, hi)
}

/// Origin RTT model: a fixed connection cost, transfer time at roughly
/// 1 MiB per 8 ms, and uniform jitter.
fn origin_rtt_ms<R: Rng>(rng: &mut R, size: u64) -> f64 {
    10.0 + 8.0 * size as f64 / MIB as f64 + 10.0 * rng.random::<f64>()
}

/// Skewed-popularity workload: key `k{rank}` is requested with probability
/// proportional to `rank^-alpha`, at [`ZIPF_REQUEST_RATE`] requests/second.
pub fn gen_zipf(params: &ZipfParams, seed: u64) -> Result<Trace, WorkloadError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<u64> = (0..params.n_keys)
        .map(|_| log_uniform(&mut rng, params.size_min, params.size_max))
        .collect();
    let sampler = ZipfSampler::new(params.n_keys, params.alpha);
    let records = (0..params.n_requests)
        .map(|i| {
            let idx = sampler.sample(&mut rng);
            let size = sizes[idx];
            RequestRecord {
                ts: i as f64 / ZIPF_REQUEST_RATE,
                key: format!("k{}", idx + 1),
                size,
                ttl: params.ttl,
                origin_rtt: origin_rtt_ms(&mut rng, size),
            }
        })
        .collect();
    Ok(Trace {
        records,
        meta: TraceMeta {
            generator: "zipf".into(),
            seed: Some(seed),
            params: params.snapshot(),
        },
    })
}

// ---------------------------------------------------------------------------
// Trap benchmark
// ---------------------------------------------------------------------------

/// Parameters of the adversarial trap workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    /// Trace length in seconds.
    pub duration: f64,
    pub n_small_hot: usize,
    pub small_size: u64,
    pub n_large_hot: usize,
    /// Inclusive byte range of large hot object sizes (uniform per key).
    pub large_size_min: u64,
    pub large_size_max: u64,
    /// Total request rate to the large hot set.
    pub large_rate: f64,
    pub burst_period: f64,
    /// Distinct keys per burst.
    pub burst_width: usize,
    /// Seconds over which one burst's requests are spread.
    pub burst_window: f64,
    pub burst_object_size: u64,
    /// One-time keys per second.
    pub scan_rate: f64,
    pub scan_size: u64,
    pub zipf_alpha: f64,
    /// Request rate of the small hot stream.
    pub base_rate: f64,
    pub ttl_default: f64,
}

impl Default for TrapParams {
    fn default() -> Self {
        let burst_period = 3600.0;
        Self {
            duration: 3.0 * burst_period,
            n_small_hot: 200,
            small_size: 20 * KIB,
            n_large_hot: 5,
            large_size_min: 5 * MIB,
            large_size_max: 15 * MIB,
            large_rate: 2.0,
            burst_period,
            burst_width: 500,
            burst_window: 600.0,
            burst_object_size: 256 * KIB,
            scan_rate: 1.0,
            scan_size: MIB,
            zipf_alpha: 1.0,
            base_rate: 50.0,
            ttl_default: 4.0 * burst_period,
        }
    }
}

impl TrapParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let invalid = |name: &'static str, reason: &str| WorkloadError::InvalidParam {
            name,
            reason: reason.to_string(),
        };
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, "must be a positive number"))
            }
        };
        for (name, v) in [
            ("n_small_hot", self.n_small_hot),
            ("n_large_hot", self.n_large_hot),
            ("burst_width", self.burst_width),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        for (name, v) in [
            ("small_size", self.small_size),
            ("large_size_min", self.large_size_min),
            ("burst_object_size", self.burst_object_size),
            ("scan_size", self.scan_size),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be at least 1 byte"));
            }
        }
        if self.large_size_max < self.large_size_min {
            return Err(invalid("large_size_max", "must be >= large_size_min"));
        }
        positive("duration", self.duration)?;
        positive("burst_period", self.burst_period)?;
        positive("burst_window", self.burst_window)?;
        positive("scan_rate", self.scan_rate)?;
        positive("large_rate", self.large_rate)?;
        positive("base_rate", self.base_rate)?;
        positive("ttl_default", self.ttl_default)?;
        if !(self.zipf_alpha.is_finite() && self.zipf_alpha >= 0.0) {
            return Err(invalid("zipf_alpha", "must be a finite number >= 0"));
        }
        if self.burst_window > self.burst_period / 2.0 {
            return Err(invalid("burst_window", "must not exceed half the burst period"));
        }
        if self.duration < self.burst_period {
            return Err(WorkloadError::TooShort {
                duration: self.duration,
                burst_period: self.burst_period,
            });
        }
        Ok(())
    }

    /// Number of burst windows in the trace.
    pub fn n_bursts(&self) -> usize {
        (self.duration / self.burst_period).floor() as usize
    }

    /// Start time of burst `b`; bursts sit in the middle of each period so the
    /// cache is warm when the first one arrives.
    pub fn burst_start(&self, b: usize) -> f64 {
        b as f64 * self.burst_period + self.burst_period / 2.0 - self.burst_window / 2.0
    }

    fn snapshot(&self) -> Vec<(String, String)> {
        let v = serde_json::to_value(self).expect("TrapParams serializes");
        v.as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.to_string()))
            .collect()
    }
}

fn poisson_times<R: Rng>(rng: &mut R, rate: f64, duration: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity((rate * duration * 1.05) as usize + 16);
    let mut t = 0.0;
    loop {
        // 1 - u lies in (0, 1], so the log is finite.
        t += -(1.0 - rng.random::<f64>()).ln() / rate;
        if t >= duration {
            return out;
        }
        out.push(t);
    }
}

/// The trap benchmark: a merge of four sub-streams built to defeat fixed
/// heuristics.
///
/// * `s{i}`: small hot objects, Poisson at `base_rate`, Zipf(`zipf_alpha`)
///   popularity.
/// * `L{i}`: large hot objects, Poisson at `large_rate`, uniform popularity;
///   sizes drawn once per key from the large size range (size inversion).
/// * `b{burst}_{j}`: every `burst_period`, `burst_width` fresh keys are each
///   requested exactly twice within `burst_window`: a first sweep over the
///   first half of the window and a second sweep, in the same order, over
///   the second half.
/// * `scan{n}`: never-repeated keys, Poisson at `scan_rate`.
///
/// Records are merged by timestamp; equal timestamps keep sub-stream order.
pub fn gen_trap(params: &TrapParams, seed: u64) -> Result<Trace, WorkloadError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ttl = params.ttl_default;
    let mut records = Vec::new();

    // (a) small hot
    let sampler = ZipfSampler::new(params.n_small_hot, params.zipf_alpha);
    for ts in poisson_times(&mut rng, params.base_rate, params.duration) {
        let idx = sampler.sample(&mut rng);
        records.push(RequestRecord {
            ts,
            key: format!("s{idx}"),
            size: params.small_size,
            ttl,
            origin_rtt: origin_rtt_ms(&mut rng, params.small_size),
        });
    }

    // (b) large hot
    let large_sizes: Vec<u64> = (0..params.n_large_hot)
        .map(|_| rng.random_range(params.large_size_min..=params.large_size_max))
        .collect();
    for ts in poisson_times(&mut rng, params.large_rate, params.duration) {
        let idx = rng.random_range(0..params.n_large_hot);
        records.push(RequestRecord {
            ts,
            key: format!("L{idx}"),
            size: large_sizes[idx],
            ttl,
            origin_rtt: origin_rtt_ms(&mut rng, large_sizes[idx]),
        });
    }

    // (c) bursts
    let half = params.burst_window / 2.0;
    let step = half / params.burst_width as f64;
    for b in 0..params.n_bursts() {
        let start = params.burst_start(b);
        for pass in 0..2 {
            for j in 0..params.burst_width {
                let size = params.burst_object_size;
                records.push(RequestRecord {
                    ts: start + pass as f64 * half + j as f64 * step,
                    key: format!("b{b}_{j}"),
                    size,
                    ttl,
                    origin_rtt: origin_rtt_ms(&mut rng, size),
                });
            }
        }
    }

    // (d) scan
    for (n, ts) in poisson_times(&mut rng, params.scan_rate, params.duration)
        .into_iter()
        .enumerate()
    {
        records.push(RequestRecord {
            ts,
            key: format!("scan{n}"),
            size: params.scan_size,
            ttl,
            origin_rtt: origin_rtt_ms(&mut rng, params.scan_size),
        });
    }

    records.sort_by(|a, b| a.ts.total_cmp(&b.ts));
    Ok(Trace {
        records,
        meta: TraceMeta {
            generator: "trap".into(),
            seed: Some(seed),
            params: params.snapshot(),
        },
    })
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Writes `trace` as CSV. Floating fields carry nine decimals, so timestamps
/// round-trip to well under a microsecond.
pub fn write_trace<W: Write>(trace: &Trace, mut sink: W) -> Result<(), WorkloadError> {
    writeln!(sink, "{CSV_HEADER}")?;
    for r in &trace.records {
        writeln!(sink, "{:.9},{},{},{:.9},{:.9}", r.ts, r.key, r.size, r.ttl, r.origin_rtt)?;
    }
    sink.flush()?;
    Ok(())
}

/// Parses a CSV trace and validates it.
pub fn load_trace<R: BufRead>(source: R) -> Result<Trace, WorkloadError> {
    let mut lines = source.lines();
    match lines.next() {
        Some(header) => {
            let header = header?;
            if header.trim_end_matches('\r') != CSV_HEADER {
                return Err(WorkloadError::Header(header));
            }
        }
        None => return Err(WorkloadError::Header(String::new())),
    }

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        records.push(parse_line(line, line_no)?);
    }
    let trace = Trace {
        records,
        meta: TraceMeta {
            generator: "csv".into(),
            seed: None,
            params: Vec::new(),
        },
    };
    trace.validate()?;
    Ok(trace)
}

fn parse_line(line: &str, line_no: usize) -> Result<RequestRecord, WorkloadError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 5 {
        return Err(WorkloadError::Parse {
            line: line_no,
            field: "record",
            reason: format!("expected 5 fields, found {}", fields.len()),
        });
    }
    let float = |idx: usize, name: &'static str| {
        fields[idx].trim().parse::<f64>().map_err(|e| WorkloadError::Parse {
            line: line_no,
            field: name,
            reason: format!("{e} ({:?})", fields[idx]),
        })
    };
    let size = fields[2].trim().parse::<u64>().map_err(|e| WorkloadError::Parse {
        line: line_no,
        field: "size",
        reason: format!("{e} ({:?})", fields[2]),
    })?;
    let record = RequestRecord {
        ts: float(0, "ts")?,
        key: fields[1].to_string(),
        size,
        ttl: float(3, "ttl")?,
        origin_rtt: float(4, "origin_rtt_ms")?,
    };
    validate_record(&record, line_no)?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ts: f64, key: &str, size: u64) -> RequestRecord {
        RequestRecord { ts, key: key.into(), size, ttl: 10.0, origin_rtt: 1.0 }
    }

    #[test]
    fn working_set_counts_each_key_once() {
        let trace = Trace {
            records: vec![rec(0.0, "a", 10), rec(1.0, "b", 20), rec(2.0, "a", 10)],
            meta: TraceMeta::default(),
        };
        assert_eq!(working_set_bytes(&trace), 30);
        assert_eq!(working_set_bytes(&Trace::default()), 0);
    }

    #[test]
    fn header_only_is_empty_trace() {
        let t = load_trace(format!("{CSV_HEADER}\n").as_bytes()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn empty_trace_writes_header_only() {
        let mut out = Vec::new();
        write_trace(&Trace::default(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn negative_size_names_line() {
        let csv = format!("{CSV_HEADER}\n0.0,a,10,1,1\n1.0,b,-5,1,1\n");
        match load_trace(csv.as_bytes()) {
            Err(WorkloadError::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "size");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_monotonic_and_size_conflicts() {
        let csv = format!("{CSV_HEADER}\n2.0,a,10,1,1\n1.0,b,5,1,1\n");
        assert!(matches!(
            load_trace(csv.as_bytes()),
            Err(WorkloadError::NonMonotonic { line: 3, .. })
        ));
        let csv = format!("{CSV_HEADER}\n0.0,a,10,1,1\n1.0,a,11,1,1\n");
        assert!(matches!(
            load_trace(csv.as_bytes()),
            Err(WorkloadError::SizeConflict { line: 3, .. })
        ));
    }

    #[test]
    fn rejects_bad_header() {
        assert!(matches!(load_trace("ts,key\n".as_bytes()), Err(WorkloadError::Header(_))));
    }

    #[test]
    fn zipf_is_deterministic() {
        let p = ZipfParams { n_keys: 50, n_requests: 2000, ..Default::default() };
        let (a, b) = (gen_zipf(&p, 7).unwrap(), gen_zipf(&p, 7).unwrap());
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_trace(&a, &mut x).unwrap();
        write_trace(&b, &mut y).unwrap();
        assert_eq!(x, y);
        assert_ne!(gen_zipf(&p, 8).unwrap().records, a.records);
    }

    #[test]
    fn zipf_uniform_when_alpha_zero() {
        let n = 40_000usize;
        let p = ZipfParams { n_keys: 4, n_requests: n, alpha: 0.0, ..Default::default() };
        let t = gen_zipf(&p, 3).unwrap();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for r in &t.records {
            *counts.entry(r.key.as_str()).or_default() += 1;
        }
        let mean = n as f64 / 4.0;
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            assert!((*c as f64 - mean).abs() <= 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn zipf_rank_ratio_matches_mass_function() {
        let p = ZipfParams { n_keys: 1000, n_requests: 200_000, alpha: 1.0, ..Default::default() };
        let t = gen_zipf(&p, 11).unwrap();
        let count = |k: &str| t.records.iter().filter(|r| r.key == k).count() as f64;
        let sampler = ZipfSampler::new(1000, 1.0);
        let expected = sampler.pmf(1) / sampler.pmf(10);
        assert!((expected - 10.0).abs() < 1e-9);
        let observed = count("k1") / count("k10");
        assert!((observed / expected - 1.0).abs() < 0.2, "observed {observed}");
    }

    #[test]
    fn zipf_rejects_bad_params() {
        let p = ZipfParams { n_keys: 0, ..Default::default() };
        assert!(matches!(gen_zipf(&p, 1), Err(WorkloadError::InvalidParam { name: "n_keys", .. })));
        let p = ZipfParams { alpha: -1.0, ..Default::default() };
        assert!(gen_zipf(&p, 1).is_err());
    }

    #[test]
    fn trap_rejects_short_duration() {
        let p = TrapParams { duration: 100.0, ..Default::default() };
        assert!(matches!(gen_trap(&p, 1), Err(WorkloadError::TooShort { .. })));
    }

    #[test]
    fn trap_structure() {
        let p = TrapParams { duration: 7300.0, ..Default::default() };
        let t = gen_trap(&p, 5).unwrap();
        t.validate().unwrap();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for r in &t.records {
            *counts.entry(r.key.as_str()).or_default() += 1;
        }
        assert!(counts.iter().filter(|(k, _)| k.starts_with("scan")).all(|(_, &c)| c == 1));
        let burst: Vec<_> = counts.iter().filter(|(k, _)| k.starts_with('b')).collect();
        assert_eq!(burst.len(), p.n_bursts() * p.burst_width);
        assert!(burst.iter().all(|(_, c)| **c == 2));
        // burst key sets are disjoint by construction of their names
        assert_eq!(p.n_bursts(), 2);
    }
}
