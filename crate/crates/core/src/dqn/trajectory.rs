//! Decision logging during replay, and hindsight labels.
//!
//! A candidate's label is 1 when its key is requested again after the
//! decision and before the candidate's expiry, whether or not it was
//! evicted: the offline trace makes the counterfactual observable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mask::select_mask;
use super::model::{DuelingModel, Workspace};
use super::policy::{masked_keys, model_mask};
use crate::cache_sim::{replay_interned, CacheState, InternedTrace, KeyId, SimConfig, SimReport};
use crate::error::{ModelError, SimError};
use crate::features::{RawFeatures, N_FEATURES};
use crate::policies::{k_tail_candidates, EvictionPolicy, Selection};

/// One eviction event as seen by the behavior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSample {
    /// Simulation clock at the decision.
    pub time: f64,
    pub needed: u64,
    pub keys: Vec<KeyId>,
    pub raw: Vec<RawFeatures>,
    pub sizes: Vec<u64>,
    pub expires_at: Vec<f64>,
    /// Bit i set when candidate i was evicted.
    pub mask: u64,
    /// Hindsight keep-labels, filled by [`label_decisions`].
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub k: usize,
    pub decisions: Vec<DecisionSample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn n_rows(&self) -> usize {
        self.decisions.iter().map(|d| d.keys.len()).sum()
    }

    /// Little-endian dump: `k: u32`, count `u64`, then per decision
    /// `time f64, needed u64, mask u64, n u32` and `n` candidates of
    /// `key u32, size u64, expires_at f64, 6 x f64 features, label u8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.decisions.len() as u64).to_le_bytes());
        for d in &self.decisions {
            out.extend_from_slice(&d.time.to_le_bytes());
            out.extend_from_slice(&d.needed.to_le_bytes());
            out.extend_from_slice(&d.mask.to_le_bytes());
            out.extend_from_slice(&(d.keys.len() as u32).to_le_bytes());
            for i in 0..d.keys.len() {
                out.extend_from_slice(&d.keys[i].to_le_bytes());
                out.extend_from_slice(&d.sizes[i].to_le_bytes());
                out.extend_from_slice(&d.expires_at[i].to_le_bytes());
                for f in d.raw[i].to_array() {
                    out.extend_from_slice(&f.to_le_bytes());
                }
                out.push(d.labels.get(i).copied().unwrap_or(0));
            }
        }
        out
    }
}

/// Fills `labels` for every decision: `y = 1` iff the key is requested at
/// some `t'` with `time < t' < expires_at`.
pub fn label_decisions(trace: &InternedTrace, traj: &mut Trajectory) -> Result<(), ModelError> {
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); trace.n_keys()];
    for r in &trace.requests {
        times[r.key as usize].push(r.ts);
    }
    for (di, d) in traj.decisions.iter_mut().enumerate() {
        d.labels.clear();
        for (&key, &exp) in d.keys.iter().zip(&d.expires_at) {
            let ts = times
                .get(key as usize)
                .filter(|t| !t.is_empty())
                .ok_or(ModelError::UnknownKey { decision: di, key })?;
            let next = ts.partition_point(|&t| t <= d.time);
            d.labels.push(u8::from(next < ts.len() && ts[next] < exp));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub k: usize,
    /// Probability of taking the LRU mask instead of the model's.
    pub epsilon: f64,
    pub seed: u64,
}

/// Epsilon-mix of LRU and a model over the K-tail, logging every decision.
struct BehaviorPolicy<'m> {
    model: Option<&'m DuelingModel<f32>>,
    cfg: GenConfig,
    rng: ChaCha8Rng,
    rows: Vec<f32>,
    sizes: Vec<u64>,
    ws: Workspace<f32>,
    log: Vec<DecisionSample>,
}

impl EvictionPolicy for BehaviorPolicy<'_> {
    fn name(&self) -> &str {
        "behavior"
    }

    fn select_victims(&mut self, state: &CacheState, needed: u64) -> Result<Selection, SimError> {
        let explore = self.rng.random::<f64>() < self.cfg.epsilon;
        let cands = k_tail_candidates(state, self.cfg.k);
        if cands.is_empty() {
            return Ok(Selection::new(Vec::new()));
        }
        let mask = match self.model {
            Some(m) if !explore => model_mask(m, &cands, needed, &mut self.rows, &mut self.sizes, &mut self.ws)?,
            _ => {
                // LRU over the tail: equal keep-values, so index order wins
                self.sizes.clear();
                self.sizes.extend(cands.iter().map(|c| c.size));
                select_mask(&vec![0.0f32; cands.len()], &self.sizes, needed)
            }
        };
        let victims = masked_keys(&cands, mask);
        self.log.push(DecisionSample {
            time: state.now(),
            needed,
            keys: cands.iter().map(|c| c.key).collect(),
            expires_at: cands.iter().map(|c| state.get(c.key).map_or(0.0, |e| e.expires_at)).collect(),
            sizes: cands.iter().map(|c| c.size).collect(),
            raw: cands.iter().map(|c| c.raw).collect(),
            mask,
            labels: Vec::new(),
        });
        Ok(Selection::new(victims))
    }
}

/// Replays `trace` under the behavior policy and returns the labeled
/// decisions together with the replay report.
pub fn generate_trajectories(
    trace: &InternedTrace,
    capacity: u64,
    model: Option<&DuelingModel<f32>>,
    cfg: &GenConfig,
) -> Result<(Trajectory, SimReport), ModelError> {
    assert!((1..=super::mask::MAX_K).contains(&cfg.k), "K must be in 1..=64");
    let mut policy = BehaviorPolicy {
        model,
        cfg: *cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        rows: Vec::with_capacity(cfg.k * N_FEATURES),
        sizes: Vec::new(),
        ws: Workspace::default(),
        log: Vec::new(),
    };
    let report =
        replay_interned(trace, capacity, &mut policy, SimConfig { time_decisions: false, audit: false })?;
    let mut traj = Trajectory { k: cfg.k, decisions: policy.log };
    label_decisions(trace, &mut traj)?;
    Ok((traj, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache_sim::Request;

    fn trace(reqs: &[(f64, KeyId)]) -> InternedTrace {
        let n = reqs.iter().map(|r| r.1).max().unwrap() as usize + 1;
        InternedTrace {
            requests: reqs
                .iter()
                .map(|&(ts, key)| Request { ts, key, size: 1, ttl: 10.0, origin_rtt: 1.0 })
                .collect(),
            names: (0..n).map(|i| format!("k{i}")).collect(),
        }
    }

    fn sample(time: f64, keys: Vec<KeyId>, expires_at: Vec<f64>) -> DecisionSample {
        let n = keys.len();
        DecisionSample {
            time,
            needed: 1,
            keys,
            raw: vec![RawFeatures::default(); n],
            sizes: vec![1; n],
            expires_at,
            mask: 1,
            labels: Vec::new(),
        }
    }

    #[test]
    fn label_boundaries() {
        let t = trace(&[(0.0, 0), (1.0, 1), (5.0, 0), (10.0, 1), (10.0, 2)]);
        let mut traj = Trajectory {
            k: 3,
            decisions: vec![sample(2.0, vec![0, 1, 2], vec![6.0, 10.0, 11.0])],
        };
        label_decisions(&t, &mut traj).unwrap();
        // 0 returns at 5 < 6; 1 returns exactly at its expiry; 2 first appears at 10 < 11
        assert_eq!(traj.decisions[0].labels, vec![1, 0, 1]);
    }

    #[test]
    fn never_requested_again_is_zero() {
        let t = trace(&[(0.0, 0), (1.0, 1)]);
        let mut traj = Trajectory { k: 1, decisions: vec![sample(1.0, vec![0], vec![100.0])] };
        label_decisions(&t, &mut traj).unwrap();
        assert_eq!(traj.decisions[0].labels, vec![0]);
    }

    #[test]
    fn same_instant_request_does_not_count() {
        let t = trace(&[(0.0, 0), (3.0, 0)]);
        let mut traj = Trajectory { k: 1, decisions: vec![sample(3.0, vec![0], vec![100.0])] };
        label_decisions(&t, &mut traj).unwrap();
        assert_eq!(traj.decisions[0].labels, vec![0]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let t = trace(&[(0.0, 0)]);
        let mut traj = Trajectory { k: 1, decisions: vec![sample(0.0, vec![7], vec![1.0])] };
        assert!(matches!(
            label_decisions(&t, &mut traj),
            Err(ModelError::UnknownKey { decision: 0, key: 7 })
        ));
    }

    #[test]
    fn no_evictions_no_samples() {
        let t = trace(&[(0.0, 0), (1.0, 1), (2.0, 0)]);
        let cfg = GenConfig { k: 4, epsilon: 0.0, seed: 1 };
        let (traj, _) = generate_trajectories(&t, 10, None, &cfg).unwrap();
        assert!(traj.is_empty());
    }

    #[test]
    fn without_a_model_every_mask_is_the_lru_prefix() {
        let reqs: Vec<(f64, KeyId)> = (0..200).map(|i| (i as f64 * 0.01, (i * 7 % 23) as KeyId)).collect();
        let t = trace(&reqs);
        let (traj, _) = generate_trajectories(&t, 5, None, &GenConfig { k: 4, epsilon: 0.0, seed: 9 }).unwrap();
        assert!(!traj.is_empty());
        assert!(traj.decisions.iter().all(|d| d.mask == 1));
    }
}
