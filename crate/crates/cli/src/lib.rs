//! Command implementations behind the `coldrl` binary.

pub mod config;
pub mod report;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use coldrl_core::cache_sim::{intern, replay_interned, InternedTrace, SimConfig};
use coldrl_core::dqn::{load_model, model_to_bytes, train_policy, DuelingModel, LearnedPolicy, RoundStats, TrainConfig, MAX_K};
use coldrl_core::features::FEATURE_NAMES;
use coldrl_core::policies::PolicyKind;
use coldrl_core::sidecar::{latency_report, ClientConfig, Decision, SidecarClient, SidecarPolicy, Server};
use coldrl_core::workload::{gen_trap, gen_zipf, load_trace, working_set_bytes, write_trace, Trace, TrapParams, ZipfParams};
use coldrl_core::{EvictionPolicy, ModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub use config::Config;
pub use report::{BenchReport, BenchRow, CompareReport, CompareRow, Format, Improvement};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 2 usage, 3 data, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

fn data<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{context}: {e}"))
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

/// Parses `4096`, `25MB` (10^6), `25MiB` (2^20), `1.5GB`, or `10%` of
/// `working_set`.
pub fn parse_capacity(s: &str, working_set: Option<u64>) -> Result<u64, CliError> {
    let s = s.trim();
    let bad = || CliError::Usage(format!("bad capacity `{s}` (examples: 4096, 25MB, 64MiB, 10%)"));
    if let Some(pct) = s.strip_suffix('%') {
        let pct: f64 = pct.trim().parse().map_err(|_| bad())?;
        let ws = working_set.ok_or_else(bad)?;
        let cap = (ws as f64 * pct / 100.0).round();
        return if pct > 0.0 && cap >= 1.0 { Ok(cap as u64) } else { Err(bad()) };
    }
    let split = s.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let num: f64 = num.trim().parse().map_err(|_| bad())?;
    let mult: f64 = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1.0,
        "kb" | "k" => 1e3,
        "mb" | "m" => 1e6,
        "gb" | "g" => 1e9,
        "kib" => 1024.0,
        "mib" => 1024.0 * 1024.0,
        "gib" => 1024.0 * 1024.0 * 1024.0,
        _ => return Err(bad()),
    };
    let cap = (num * mult).round();
    if !(cap >= 1.0 && cap < u64::MAX as f64) {
        return Err(bad());
    }
    Ok(cap as u64)
}

/// Overrides named fields of `base` with `name=value` pairs. Values are read
/// as JSON when possible, else as strings.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(base: &T, pairs: &[(String, String)]) -> Result<T, CliError> {
    let mut v = serde_json::to_value(base).expect("parameters serialize");
    let obj = v.as_object_mut().expect("parameters are a struct");
    let known: Vec<String> = obj.keys().cloned().collect();
    for (name, value) in pairs {
        let slot = obj.get_mut(name.as_str()).ok_or_else(|| {
            CliError::Usage(format!("unknown parameter `{name}` (known: {})", known.join(", ")))
        })?;
        *slot = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.clone()));
    }
    serde_json::from_value(v).map_err(|e| CliError::Usage(format!("bad parameter value: {e}")))
}

pub fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected name=value, got `{s}`"))
}

/// Feature names or indices, comma separated.
pub fn parse_ablate(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            FEATURE_NAMES
                .iter()
                .position(|n| *n == t)
                .or_else(|| t.parse().ok().filter(|&i: &usize| i < FEATURE_NAMES.len()))
                .ok_or_else(|| CliError::Usage(format!("unknown feature `{t}` (one of {})", FEATURE_NAMES.join(", "))))
        })
        .collect()
}

pub fn read_trace(path: &Path) -> Result<Trace, CliError> {
    let f = File::open(path).map_err(data(&format!("cannot open trace {}", path.display())))?;
    load_trace(BufReader::new(f)).map_err(data(&format!("invalid trace {}", path.display())))
}

pub fn read_model(path: &Path) -> Result<DuelingModel<f32>, CliError> {
    let f = File::open(path).map_err(data(&format!("cannot open model {}", path.display())))?;
    load_model(BufReader::new(f)).map_err(data(&format!("invalid model {}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Zipf,
    Trap,
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    pub kind: GenKind,
    pub seed: u64,
    /// Generator parameter overrides by field name.
    pub params: Vec<(String, String)>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub records: usize,
    pub distinct_keys: usize,
    pub working_set_bytes: u64,
}

pub fn cmd_gen(args: &GenArgs) -> Result<GenSummary, CliError> {
    let trace = match args.kind {
        GenKind::Zipf => {
            let p: ZipfParams = apply_overrides(&ZipfParams::default(), &args.params)?;
            gen_zipf(&p, args.seed)
        }
        GenKind::Trap => {
            let p: TrapParams = apply_overrides(&TrapParams::default(), &args.params)?;
            gen_trap(&p, args.seed)
        }
    }
    .map_err(data("invalid generator parameters"))?;
    let f = File::create(&args.out).map_err(runtime(&format!("cannot write {}", args.out.display())))?;
    write_trace(&trace, BufWriter::new(f)).map_err(runtime("writing trace"))?;
    Ok(GenSummary {
        records: trace.len(),
        distinct_keys: trace.distinct_keys(),
        working_set_bytes: working_set_bytes(&trace),
    })
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub trace: PathBuf,
    pub capacity: String,
    pub out: PathBuf,
    pub config: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub capacity: u64,
    pub rounds: Vec<RoundStats>,
    pub final_loss: f64,
    pub model_bytes: usize,
}

/// Trains from an interned trace and returns the model with per-round stats.
pub fn train_on(trace: &InternedTrace, capacity: u64, cfg: &TrainConfig) -> Result<(DuelingModel<f32>, Vec<RoundStats>), CliError> {
    train_policy(trace, capacity, cfg).map_err(|e| match e {
        ModelError::EmptyTrajectory => CliError::Data(format!(
            "replay at capacity {capacity} bytes caused no evictions, so there is nothing to learn from; \
             use a capacity well below the trace's working set"
        )),
        ModelError::Config(m) => CliError::Usage(format!("invalid training configuration: {m}")),
        other => CliError::Runtime(format!("training failed: {other}")),
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary, CliError> {
    let trace = read_trace(&args.trace)?;
    let capacity = parse_capacity(&args.capacity, Some(working_set_bytes(&trace)))?;
    let (model, rounds) = train_on(&intern(&trace), capacity, &args.config)?;
    let bytes = model_to_bytes(&model);
    std::fs::write(&args.out, &bytes).map_err(runtime(&format!("cannot write {}", args.out.display())))?;
    Ok(TrainSummary {
        capacity,
        final_loss: rounds.last().map_or(f64::NAN, |r| r.train.final_loss() as f64),
        rounds,
        model_bytes: bytes.len(),
    })
}

#[derive(Debug, Clone)]
pub struct CompareArgs {
    pub trace: PathBuf,
    pub capacities: Vec<String>,
    pub policies: Vec<PolicyKind>,
    pub model: Option<PathBuf>,
    /// Candidate count for learned policies; defaults to the model's.
    pub k: Option<usize>,
    pub client: ClientConfig,
}

enum Built {
    Plain(Box<dyn EvictionPolicy + Send>),
    Sidecar(SidecarPolicy),
}

pub fn cmd_compare(args: &CompareArgs) -> Result<CompareReport, CliError> {
    if args.policies.is_empty() {
        return Err(CliError::Usage("no policies given".into()));
    }
    let needs_model = args.policies.iter().any(|p| p.is_learned());
    let model = match (&args.model, needs_model) {
        (Some(p), true) => Some(Arc::new(read_model(p)?)),
        (None, true) => return Err(CliError::Usage("coldrl and sidecar policies need --model".into())),
        _ => None,
    };
    if let Some(k) = args.k {
        if !(1..=MAX_K).contains(&k) {
            return Err(CliError::Usage(format!("K = {k} is outside 1..=64")));
        }
    }
    args.client.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let trace = read_trace(&args.trace)?;
    let ws = working_set_bytes(&trace);
    let capacities: Vec<u64> =
        args.capacities.iter().map(|c| parse_capacity(c, Some(ws))).collect::<Result<_, _>>()?;
    if capacities.is_empty() {
        return Err(CliError::Usage("no capacities given".into()));
    }
    let interned = intern(&trace);
    let jobs: Vec<(u64, PolicyKind)> =
        capacities.iter().flat_map(|&c| args.policies.iter().map(move |&p| (c, p))).collect();

    let rows: Vec<CompareRow> = jobs
        .par_iter()
        .map(|&(capacity, kind)| {
            let k = || args.k.or(model.as_ref().map(|m| m.k_trained as usize).filter(|&k| k > 0));
            let mut built = match kind {
                PolicyKind::ColdRl => {
                    let m = Arc::clone(model.as_ref().unwrap());
                    Built::Plain(Box::new(match k() {
                        Some(k) => LearnedPolicy::new(m, k),
                        None => LearnedPolicy::with_trained_k(m),
                    }))
                }
                PolicyKind::Sidecar => {
                    let m = model.as_ref().unwrap();
                    let client = SidecarClient::new(args.client.clone(), m.norm)
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                    Built::Sidecar(SidecarPolicy::new(client, k().unwrap_or(coldrl_core::dqn::DEFAULT_K)))
                }
                classical => Built::Plain(classical.build_classical(capacity).expect("classical policy")),
            };
            let policy: &mut dyn EvictionPolicy = match &mut built {
                Built::Plain(p) => p.as_mut(),
                Built::Sidecar(p) => p,
            };
            let sim = replay_interned(&interned, capacity, policy, SimConfig { time_decisions: true, audit: false })
                .map_err(runtime(&format!("replaying {kind} at {capacity} bytes")))?;
            Ok(CompareRow::from_report(kind, &sim))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(CompareReport::new(args.trace.display().to_string(), ws, rows))
}

pub fn cmd_serve(model: &Path, socket: &Path) -> Result<(), CliError> {
    let model = read_model(model)?;
    let server = Server::bind(socket, Some(model)).map_err(runtime(&format!("cannot bind {}", socket.display())))?;
    eprintln!("serving on {}", server.path().display());
    server.run().map_err(runtime("server"))
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub client: ClientConfig,
    pub ks: Vec<usize>,
    pub requests: usize,
    pub seed: u64,
}

pub const BENCH_WARMUP: usize = 200;

/// Synthetic decisions through the client, after [`BENCH_WARMUP`] unrecorded
/// ones.
pub fn bench_decisions(client: &mut SidecarClient, k: usize, requests: usize, seed: u64) -> Vec<Decision> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k as u64);
    let mut rows = vec![0.0f32; k * 6];
    let mut sizes = vec![0u64; k];
    let mut all: Vec<Decision> = (0..BENCH_WARMUP + requests)
        .map(|_| {
            rows.iter_mut().for_each(|v| *v = rng.random_range(-2.0..2.0));
            sizes.iter_mut().for_each(|s| *s = rng.random_range(1_000..1_000_000));
            let needed = rng.random_range(1..2_000_000);
            client.decide_rows(&sizes, &rows, needed)
        })
        .collect();
    all.drain(..BENCH_WARMUP);
    all
}

pub fn cmd_bench_latency(args: &BenchArgs) -> Result<BenchReport, CliError> {
    if args.requests == 0 {
        return Err(CliError::Usage("--requests must be positive".into()));
    }
    let mut rows = Vec::new();
    for &k in &args.ks {
        if !(1..=MAX_K).contains(&k) {
            return Err(CliError::Usage(format!("K = {k} is outside 1..=64")));
        }
        let mut client = SidecarClient::new(args.client.clone(), Default::default())
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let decisions = bench_decisions(&mut client, k, args.requests, args.seed);
        let r = latency_report(&decisions).map_err(runtime("latency report"))?;
        rows.push(BenchRow::new(k, r));
    }
    Ok(BenchReport { socket: args.client.socket.display().to_string(), deadline_us: args.client.deadline_us, rows })
}
