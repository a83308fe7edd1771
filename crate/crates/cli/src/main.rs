use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coldrl_cli::*;
use coldrl_core::dqn::TrainConfig;
use coldrl_core::policies::PolicyKind;
use coldrl_core::sidecar::{ClientConfig, Mode, DEFAULT_DEADLINE_US, DEFAULT_SOCKET, SOCKET_ENV};

/// Cache-eviction lab: workloads, training, policy comparison, and the
/// decision sidecar.
#[derive(Parser)]
#[command(name = "coldrl", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// table, json, or csv.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Sidecar socket path (default: $COLDRL_SOCKET, then /tmp/coldrl.sock).
    #[arg(long, global = true)]
    socket: Option<PathBuf>,
    /// Client decision deadline in microseconds.
    #[arg(long, global = true)]
    deadline_us: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Zipf,
    Trap,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace.
    Gen {
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
        /// Generator parameter override, e.g. --param n_keys=5000.
        #[arg(long = "param", value_parser = parse_pair)]
        params: Vec<(String, String)>,
    },
    /// Train a model on a trace.
    Train {
        #[arg(long)]
        trace: PathBuf,
        /// Bytes, with optional KB/MB/GB/KiB/MiB/GiB suffix, or a percentage of the working set.
        #[arg(long)]
        capacity: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Features to remove, by name or index (comma separated).
        #[arg(long)]
        ablate: Option<String>,
    },
    /// Replay a trace under several policies and capacities.
    Compare {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated capacities.
        #[arg(long)]
        capacities: Option<String>,
        /// Comma-separated policies: lru, lfu, size, arc, hybrid, coldrl, sidecar.
        #[arg(long)]
        policies: Option<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        rollout_percent: Option<u8>,
    },
    /// Run the inference sidecar.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Fire synthetic decisions at the sidecar and report latency.
    BenchLatency {
        /// Comma-separated K values.
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        requests: Option<usize>,
    },
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|e| CliError::Usage(format!("bad {what} `{t}`: {e}"))))
        .collect()
}

fn client_config(common: &Common, cfg: &Config) -> Result<ClientConfig, CliError> {
    let socket = match &common.socket {
        Some(s) => s.clone(),
        None => std::env::var_os(SOCKET_ENV)
            .map(PathBuf::from)
            .or(cfg.get::<PathBuf>("socket")?)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_SOCKET)),
    };
    Ok(ClientConfig {
        socket,
        deadline_us: cfg.pick(common.deadline_us, "deadline_us", DEFAULT_DEADLINE_US)?,
        breaker_threshold: cfg.pick(None, "breaker_threshold", 5)?,
        breaker_cooldown: Duration::from_secs_f64(cfg.pick(None, "breaker_cooldown_s", 10.0)?),
        mode: cfg.pick(None, "mode", Mode::Active)?,
        rollout_percent: cfg.pick(None, "rollout_percent", 100)?,
        rollout_seed: 0,
    })
}

fn run(cli: Cli) -> Result<String, CliError> {
    let c = &cli.common;
    let cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = cfg.pick(c.seed, "seed", DEFAULT_SEED)?;
    let format = cfg.pick(c.format, "format", Format::Table)?;

    match cli.command {
        Command::Gen { kind, out, params } => {
            let kind = match kind {
                Kind::Zipf => GenKind::Zipf,
                Kind::Trap => GenKind::Trap,
            };
            let s = cmd_gen(&GenArgs { kind, seed, params, out: out.clone() })?;
            Ok(format!(
                "wrote {} ({} requests, {} keys, working set {} bytes)\n",
                out.display(),
                s.records,
                s.distinct_keys,
                s.working_set_bytes
            ))
        }
        Command::Train { trace, capacity, out, iterations, epsilon, epochs, gamma, lr, batch, k, ablate } => {
            let d = TrainConfig::default();
            let ablate = match ablate.or(cfg.raw("ablate").map(str::to_string)) {
                Some(a) => parse_ablate(&a)?,
                None => Vec::new(),
            };
            let config = TrainConfig {
                gamma: cfg.pick(gamma, "gamma", d.gamma)?,
                epsilon: cfg.pick(epsilon, "epsilon", d.epsilon)?,
                batch: cfg.pick(batch, "batch", d.batch)?,
                lr: cfg.pick(lr, "lr", d.lr)?,
                epochs: cfg.pick(epochs, "epochs", d.epochs)?,
                target_sync: cfg.pick(None, "target_sync", d.target_sync)?,
                seed,
                k: cfg.pick(k, "k", d.k)?,
                hidden: d.hidden,
                ablate,
                replay_capacity: cfg.pick(None, "replay_capacity", d.replay_capacity)?,
                iterations: cfg.pick(iterations, "iterations", d.iterations)?,
            };
            let s = cmd_train(&TrainArgs { trace, capacity, out: out.clone(), config })?;
            let mut text = String::new();
            for r in &s.rounds {
                text += &format!(
                    "round {}: {} decisions, behavior hit ratio {:.4}, {} steps, final loss {:.6}\n",
                    r.round,
                    r.decisions,
                    r.behavior_hit_ratio,
                    r.train.steps,
                    r.train.final_loss()
                );
            }
            let total: usize = s.rounds.iter().map(|r| r.decisions).sum();
            text += &format!(
                "wrote {} ({} bytes); capacity {} bytes, {} trajectories with {} decisions, final loss {:.6}\n",
                out.display(),
                s.model_bytes,
                s.capacity,
                s.rounds.len(),
                total,
                s.final_loss
            );
            Ok(text)
        }
        Command::Compare { trace, capacities, policies, model, k, mode, rollout_percent } => {
            let capacities = capacities.or(cfg.raw("capacities").map(str::to_string)).unwrap_or_else(|| "25MB".into());
            let policies = policies
                .or(cfg.raw("policies").map(str::to_string))
                .unwrap_or_else(|| "lru,lfu,size,arc,hybrid".into());
            let mut client = client_config(c, &cfg)?;
            if let Some(m) = mode {
                client.mode = m;
            }
            if let Some(r) = rollout_percent {
                client.rollout_percent = r;
            }
            let report = cmd_compare(&CompareArgs {
                trace,
                capacities: list(&capacities, "capacity")?,
                policies: list::<PolicyKind>(&policies, "policy")?,
                model: model.or(cfg.get("model")?),
                k: k.or(cfg.get("k")?),
                client,
            })?;
            Ok(report.render(format))
        }
        Command::Serve { model } => {
            let model = model
                .or(cfg.get("model")?)
                .ok_or_else(|| CliError::Usage("serve needs --model".into()))?;
            let client = client_config(c, &cfg)?;
            cmd_serve(&model, &client.socket)?;
            Ok(String::new())
        }
        Command::BenchLatency { k, requests } => {
            let ks = k.or(cfg.raw("k").map(str::to_string)).unwrap_or_else(|| "8".into());
            let report = cmd_bench_latency(&BenchArgs {
                client: client_config(c, &cfg)?,
                ks: list(&ks, "K")?,
                requests: cfg.pick(requests, "requests", 10_000)?,
                seed,
            })?;
            Ok(report.render(format))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
