//! Compare and latency reports, rendered as table, JSON, or CSV from the
//! same rounded values.

use std::fmt::Write as _;
use std::str::FromStr;

use coldrl_core::policies::PolicyKind;
use coldrl_core::sidecar::LatencyReport;
use coldrl_core::SimReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format `{s}` (table|json|csv)")),
        }
    }
}

fn r6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn r1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub policy: String,
    pub capacity: u64,
    pub hit_ratio: f64,
    pub byte_hit_ratio: f64,
    pub evictions: u64,
    pub fallback_rate: f64,
    /// Wall-clock; excluded from determinism checks.
    pub latency: Latency,
}

impl CompareRow {
    pub fn from_report(kind: PolicyKind, r: &SimReport) -> Self {
        let fallback = if r.eviction_events == 0 { 0.0 } else { r.fallback_events as f64 / r.eviction_events as f64 };
        Self {
            policy: kind.as_str().to_string(),
            capacity: r.capacity,
            hit_ratio: r6(r.hit_ratio),
            byte_hit_ratio: r6(r.byte_hit_ratio),
            evictions: r.evictions,
            fallback_rate: r6(fallback),
            latency: Latency {
                p50_us: r1(r.decision_latency.p50),
                p95_us: r1(r.decision_latency.p95),
                p99_us: r1(r.decision_latency.p99),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub capacity: u64,
    pub policy: String,
    pub hit_ratio: f64,
    pub best_classical: String,
    pub best_classical_hit_ratio: f64,
    /// `(learned - best classical) / best classical`; absent when the best
    /// classical hit ratio is zero.
    pub improvement: Option<f64>,
}

/// Published hit ratios for context. They come from other traces and
/// hardware and are never compared against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub regime: &'static str,
    pub lru: f64,
    pub lfu: f64,
    pub size: f64,
    pub arc: f64,
    pub hybrid: f64,
    pub coldrl: f64,
    pub improvement: Option<f64>,
}

pub const REFERENCE_NOTE: &str =
    "published production results (different traces and hardware); context only, not asserted";

pub const HIT_RATIO_REFERENCE: [ReferenceRow; 4] = [
    ReferenceRow { regime: "high (25 MB)", lru: 0.089, lfu: 0.112, size: 0.073, arc: 0.144, hybrid: 0.123, coldrl: 0.354, improvement: Some(1.46) },
    ReferenceRow { regime: "medium (100 MB)", lru: 0.623, lfu: 0.689, size: 0.512, arc: 0.753, hybrid: 0.723, coldrl: 0.868, improvement: Some(0.15) },
    ReferenceRow { regime: "low (400 MB)", lru: 0.916, lfu: 0.909, size: 0.823, arc: 0.919, hybrid: 0.912, coldrl: 0.918, improvement: None },
    ReferenceRow { regime: "trap", lru: 0.056, lfu: 0.078, size: 0.089, arc: 0.134, hybrid: 0.112, coldrl: 0.421, improvement: Some(2.14) },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub trace: String,
    pub working_set_bytes: u64,
    pub rows: Vec<CompareRow>,
    pub improvements: Vec<Improvement>,
    pub reference_note: String,
    pub reference: Vec<ReferenceRow>,
}

impl CompareReport {
    pub fn new(trace: String, working_set_bytes: u64, rows: Vec<CompareRow>) -> Self {
        let classical: Vec<&str> = PolicyKind::CLASSICAL.iter().map(|p| p.as_str()).collect();
        let mut improvements = Vec::new();
        for learned in rows.iter().filter(|r| !classical.contains(&r.policy.as_str())) {
            let best = rows
                .iter()
                .filter(|r| r.capacity == learned.capacity && classical.contains(&r.policy.as_str()))
                .max_by(|a, b| a.hit_ratio.total_cmp(&b.hit_ratio));
            if let Some(best) = best {
                improvements.push(Improvement {
                    capacity: learned.capacity,
                    policy: learned.policy.clone(),
                    hit_ratio: learned.hit_ratio,
                    best_classical: best.policy.clone(),
                    best_classical_hit_ratio: best.hit_ratio,
                    improvement: (best.hit_ratio > 0.0)
                        .then(|| r6((learned.hit_ratio - best.hit_ratio) / best.hit_ratio)),
                });
            }
        }
        Self {
            trace,
            working_set_bytes,
            rows,
            improvements,
            reference_note: REFERENCE_NOTE.to_string(),
            reference: HIT_RATIO_REFERENCE.to_vec(),
        }
    }

    pub fn row(&self, policy: &str, capacity: u64) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.policy == policy && r.capacity == capacity)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            Format::Csv => self.csv(),
            Format::Table => self.table(),
        }
    }

    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "trace {}  working set {} bytes", self.trace, self.working_set_bytes);
        let _ = writeln!(
            s,
            "{:<8} {:>12} {:>10} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9}",
            "policy", "capacity", "hit", "byte_hit", "evictions", "fallback", "p50_us", "p95_us", "p99_us"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<8} {:>12} {:>10} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9}",
                r.policy,
                r.capacity,
                r.hit_ratio,
                r.byte_hit_ratio,
                r.evictions,
                r.fallback_rate,
                r.latency.p50_us,
                r.latency.p95_us,
                r.latency.p99_us
            );
        }
        if !self.improvements.is_empty() {
            let _ = writeln!(s, "\nimprovement vs best classical");
            for i in &self.improvements {
                let imp = i.improvement.map_or("n/a".to_string(), |v| v.to_string());
                let _ = writeln!(
                    s,
                    "{:<8} {:>12} {:>10} best {} {} improvement {}",
                    i.policy, i.capacity, i.hit_ratio, i.best_classical, i.best_classical_hit_ratio, imp
                );
            }
        }
        let _ = writeln!(s, "\nreference: {}", self.reference_note);
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>12}",
            "regime", "lru", "lfu", "size", "arc", "hybrid", "coldrl", "improvement"
        );
        for r in &self.reference {
            let imp = r.improvement.map_or("-".to_string(), |v| v.to_string());
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>12}",
                r.regime, r.lru, r.lfu, r.size, r.arc, r.hybrid, r.coldrl, imp
            );
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from(
            "kind,policy,capacity,hit_ratio,byte_hit_ratio,evictions,fallback_rate,p50_us,p95_us,p99_us,best_classical,best_classical_hit_ratio,improvement\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "result,{},{},{},{},{},{},{},{},{},,,",
                r.policy,
                r.capacity,
                r.hit_ratio,
                r.byte_hit_ratio,
                r.evictions,
                r.fallback_rate,
                r.latency.p50_us,
                r.latency.p95_us,
                r.latency.p99_us
            );
        }
        for i in &self.improvements {
            let imp = i.improvement.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(
                s,
                "improvement,{},{},{},,,,,,,{},{},{}",
                i.policy, i.capacity, i.hit_ratio, i.best_classical, i.best_classical_hit_ratio, imp
            );
        }
        for r in &self.reference {
            for (p, v) in [("lru", r.lru), ("lfu", r.lfu), ("size", r.size), ("arc", r.arc), ("hybrid", r.hybrid), ("coldrl", r.coldrl)] {
                let _ = writeln!(s, "reference,{p},{},{v},,,,,,,,,", r.regime);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub k: usize,
    pub decisions: usize,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    pub mean_us: f64,
    pub fallback_rate: f64,
    pub sources: Vec<(String, usize)>,
}

impl BenchRow {
    pub fn new(k: usize, r: LatencyReport) -> Self {
        Self {
            k,
            decisions: r.decisions,
            p50_us: r1(r.p50_us),
            p95_us: r1(r.p95_us),
            p99_us: r1(r.p99_us),
            mean_us: r1(r.mean_us),
            fallback_rate: r6(r.fallback_rate),
            sources: r.by_source.iter().filter(|(_, n)| *n > 0).map(|(s, n)| (s.as_str().to_string(), *n)).collect(),
        }
    }
}

/// Published latency percentiles (µs) and fallback rate, for context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReference {
    pub metric: &'static str,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
}

pub const LATENCY_REFERENCE: [LatencyReference; 2] = [
    LatencyReference { metric: "inference", p50_us: 127.0, p95_us: 342.0, p99_us: 487.0 },
    LatencyReference { metric: "total eviction", p50_us: 216.0, p95_us: 498.0, p99_us: 710.0 },
];
pub const FALLBACK_RATE_REFERENCE: f64 = 0.0002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub socket: String,
    pub deadline_us: u64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let v = serde_json::json!({
                    "socket": self.socket,
                    "deadline_us": self.deadline_us,
                    "rows": self.rows,
                    "reference_note": REFERENCE_NOTE,
                    "reference": LATENCY_REFERENCE,
                    "reference_fallback_rate": FALLBACK_RATE_REFERENCE,
                });
                serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
            }
            Format::Csv => {
                let mut s = String::from("kind,k,decisions,p50_us,p95_us,p99_us,mean_us,fallback_rate\n");
                for r in &self.rows {
                    let _ = writeln!(
                        s,
                        "measured,{},{},{},{},{},{},{}",
                        r.k, r.decisions, r.p50_us, r.p95_us, r.p99_us, r.mean_us, r.fallback_rate
                    );
                }
                for r in &LATENCY_REFERENCE {
                    let _ = writeln!(s, "reference {},,,{},{},{},,{}", r.metric, r.p50_us, r.p95_us, r.p99_us, FALLBACK_RATE_REFERENCE);
                }
                s
            }
            Format::Table => {
                let mut s = String::new();
                let _ = writeln!(s, "socket {}  deadline {} us", self.socket, self.deadline_us);
                let _ = writeln!(
                    s,
                    "{:<18} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10}  sources",
                    "K", "decisions", "p50_us", "p95_us", "p99_us", "mean_us", "fallback"
                );
                for r in &self.rows {
                    let sources: Vec<String> = r.sources.iter().map(|(s, n)| format!("{s}={n}")).collect();
                    let _ = writeln!(
                        s,
                        "{:<18} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10}  {}",
                        r.k,
                        r.decisions,
                        r.p50_us,
                        r.p95_us,
                        r.p99_us,
                        r.mean_us,
                        r.fallback_rate,
                        sources.join(" ")
                    );
                }
                let _ = writeln!(s, "\nreference: {REFERENCE_NOTE}");
                for r in &LATENCY_REFERENCE {
                    let _ = writeln!(
                        s,
                        "{:<18} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10}",
                        r.metric, "", r.p50_us, r.p95_us, r.p99_us, "", FALLBACK_RATE_REFERENCE
                    );
                }
                s
            }
        }
    }
}
