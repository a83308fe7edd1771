//! Browser bindings: generate a workload, compare eviction policies on it,
//! and train a small learned policy, all in-page.
//!
//! Every method has a plain-Rust `try_*` twin returning `Result<_, String>`;
//! the exported methods convert its errors to `JsError`. Results are JSON
//! strings.

use std::sync::Arc;

use coldrl_core::cache_sim::{intern, replay_interned, InternedTrace, SimConfig};
use coldrl_core::dqn::{train_policy, DuelingModel, LearnedPolicy, TrainConfig};
use coldrl_core::policies::{EvictionPolicy, PolicyKind};
use coldrl_core::workload::{gen_trap, gen_zipf, working_set_bytes, TrapParams, ZipfParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Rough request rate of the default trap mix, used to size demo traces.
const TRAP_REQUESTS_PER_SECOND: f64 = 55.0;

#[derive(Serialize)]
struct Summary {
    kind: String,
    requests: usize,
    keys: usize,
    working_set_bytes: u64,
}

#[derive(Serialize)]
struct Row {
    policy: String,
    capacity: u64,
    hit_ratio: f64,
    byte_hit_ratio: f64,
    evictions: u64,
}

#[derive(Serialize)]
struct Round {
    round: usize,
    decisions: usize,
    behavior_hit_ratio: f64,
    final_loss: f32,
}

#[wasm_bindgen]
pub struct Lab {
    kind: String,
    seed: u64,
    trace: InternedTrace,
    working_set: u64,
    model: Option<Arc<DuelingModel<f32>>>,
}

fn capacity_of(working_set: u64, percent: f64) -> Result<u64, String> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(format!("capacity {percent}% is outside (0, 100]"));
    }
    Ok(((working_set as f64 * percent / 100.0).round() as u64).max(1))
}

impl Lab {
    /// `size` is the approximate number of requests.
    pub fn try_new(kind: &str, seed: u32, size: u32) -> Result<Lab, String> {
        let seed = u64::from(seed);
        let trace = match kind {
            "zipf" => {
                let p = ZipfParams {
                    n_requests: size as usize,
                    n_keys: (size as usize / 20).max(100),
                    ..ZipfParams::default()
                };
                gen_zipf(&p, seed)
            }
            "trap" => {
                let duration = f64::from(size) / TRAP_REQUESTS_PER_SECOND;
                let period = duration / 3.0;
                let p = TrapParams {
                    duration,
                    burst_period: period,
                    burst_window: period / 6.0,
                    ttl_default: 4.0 * period,
                    ..TrapParams::default()
                };
                gen_trap(&p, seed)
            }
            other => return Err(format!("unknown workload `{other}` (zipf|trap)")),
        }
        .map_err(|e| e.to_string())?;
        Ok(Lab { kind: kind.to_string(), seed, working_set: working_set_bytes(&trace), trace: intern(&trace), model: None })
    }

    pub fn try_summary(&self) -> String {
        serde_json::to_string(&Summary {
            kind: self.kind.clone(),
            requests: self.trace.requests.len(),
            keys: self.trace.n_keys(),
            working_set_bytes: self.working_set,
        })
        .unwrap()
    }

    /// Replays every classical policy, plus `coldrl` once a model is trained.
    pub fn try_compare(&self, capacity_percent: f64) -> Result<String, String> {
        let capacity = capacity_of(self.working_set, capacity_percent)?;
        let mut policies: Vec<(PolicyKind, Box<dyn EvictionPolicy>)> = PolicyKind::CLASSICAL
            .iter()
            .map(|&k| (k, k.build_classical(capacity).unwrap() as Box<dyn EvictionPolicy>))
            .collect();
        if let Some(m) = &self.model {
            policies.push((PolicyKind::ColdRl, Box::new(LearnedPolicy::with_trained_k(Arc::clone(m)))));
        }
        let config = SimConfig { time_decisions: false, audit: false };
        let rows = policies
            .into_iter()
            .map(|(kind, mut p)| {
                let r = replay_interned(&self.trace, capacity, p.as_mut(), config).map_err(|e| e.to_string())?;
                Ok(Row {
                    policy: kind.to_string(),
                    capacity,
                    hit_ratio: r.hit_ratio,
                    byte_hit_ratio: r.byte_hit_ratio,
                    evictions: r.evictions,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(serde_json::to_string(&rows).unwrap())
    }

    pub fn try_train(&mut self, capacity_percent: f64, iterations: u32, epochs: u32) -> Result<String, String> {
        let capacity = capacity_of(self.working_set, capacity_percent)?;
        let cfg = TrainConfig {
            iterations: iterations as usize,
            epochs: epochs as usize,
            seed: self.seed,
            ..TrainConfig::default()
        };
        let (model, rounds) = train_policy(&self.trace, capacity, &cfg).map_err(|e| e.to_string())?;
        self.model = Some(Arc::new(model));
        let rounds: Vec<Round> = rounds
            .iter()
            .map(|r| Round {
                round: r.round,
                decisions: r.decisions,
                behavior_hit_ratio: r.behavior_hit_ratio,
                final_loss: r.train.final_loss(),
            })
            .collect();
        Ok(serde_json::to_string(&rounds).unwrap())
    }
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, seed: u32, size: u32) -> Result<Lab, JsError> {
        Self::try_new(kind, seed, size).map_err(|e| JsError::new(&e))
    }

    pub fn summary(&self) -> String {
        self.try_summary()
    }

    pub fn compare(&self, capacity_percent: f64) -> Result<String, JsError> {
        self.try_compare(capacity_percent).map_err(|e| JsError::new(&e))
    }

    pub fn train(&mut self, capacity_percent: f64, iterations: u32, epochs: u32) -> Result<String, JsError> {
        self.try_train(capacity_percent, iterations, epochs).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn trained(&self) -> bool {
        self.model.is_some()
    }
}
