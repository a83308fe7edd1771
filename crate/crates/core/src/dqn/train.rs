//! Offline training: Huber regression of Q onto hindsight labels (or a
//! bootstrapped target when `gamma > 0`) with Adam over uniformly sampled
//! replay batches, plus the finite-difference gradient check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{DuelingModel, Workspace, HIDDEN1, HIDDEN2};
use super::policy::DEFAULT_K;
use super::scalar::Scalar;
use super::trajectory::{generate_trajectories, GenConfig, Trajectory};
use crate::cache_sim::{InternedTrace, SimReport};
use crate::error::ModelError;
use crate::features::{fit_norm, normalize, NormParams, N_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    /// LRU-mix rate of the behavior policy.
    pub epsilon: f64,
    /// Decisions per batch.
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Target-network sync period in steps; used only when `gamma > 0`.
    pub target_sync: usize,
    pub seed: u64,
    pub k: usize,
    pub hidden: (usize, usize),
    /// Feature indices removed from the model (first-layer columns zeroed).
    pub ablate: Vec<usize>,
    /// Upper bound on decisions sampled from; larger pools are subsampled.
    pub replay_capacity: usize,
    /// Generate/train rounds in [`train_policy`].
    pub iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            epsilon: 0.2,
            batch: 256,
            lr: 1e-3,
            epochs: 10,
            target_sync: 1000,
            seed: 0,
            k: DEFAULT_K,
            hidden: (HIDDEN1, HIDDEN2),
            ablate: Vec::new(),
            replay_capacity: 65_536,
            iterations: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if self.batch == 0 || self.epochs == 0 || self.iterations == 0 || self.replay_capacity == 0 {
            return bad("batch, epochs, iterations and replay_capacity must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(1..=64).contains(&self.k) {
            return bad(format!("K = {} outside 1..=64", self.k));
        }
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return bad("hidden sizes must be positive".into());
        }
        if self.gamma > 0.0 && self.target_sync == 0 {
            return bad("target_sync must be positive when gamma > 0".into());
        }
        if let Some(f) = self.ablate.iter().find(|&&f| f >= N_FEATURES) {
            return bad(format!("ablated feature index {f} out of range"));
        }
        Ok(())
    }
}

/// Normalized decision rows ready for batching.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Vec<f32>,
    y: Vec<f32>,
    /// Row offset of each decision, plus the end.
    offsets: Vec<usize>,
    /// Following decision of the same trajectory, if any.
    next: Vec<Option<usize>>,
}

impl Dataset {
    pub fn new(trajs: &[Trajectory], norm: &NormParams) -> Self {
        let mut ds = Dataset { x: Vec::new(), y: Vec::new(), offsets: vec![0], next: Vec::new() };
        for t in trajs {
            let n = t.decisions.len();
            for (i, d) in t.decisions.iter().enumerate() {
                for (raw, &label) in d.raw.iter().zip(&d.labels) {
                    ds.x.extend_from_slice(&normalize(raw, norm));
                    ds.y.push(f32::from(label));
                }
                ds.offsets.push(ds.y.len());
                let idx = ds.next.len();
                ds.next.push((i + 1 < n).then_some(idx + 1));
            }
        }
        ds
    }

    /// Builds a dataset from already-normalized rows; one entry per decision.
    pub fn from_rows(decisions: &[(Vec<[f32; N_FEATURES]>, Vec<f32>)]) -> Self {
        let mut ds = Dataset { x: Vec::new(), y: Vec::new(), offsets: vec![0], next: Vec::new() };
        for (rows, labels) in decisions {
            assert_eq!(rows.len(), labels.len());
            for r in rows {
                ds.x.extend_from_slice(r);
            }
            ds.y.extend_from_slice(labels);
            ds.offsets.push(ds.y.len());
            ds.next.push(None);
        }
        ds
    }

    pub fn len(&self) -> usize {
        self.next.len()
    }

    pub fn is_empty(&self) -> bool {
        self.next.is_empty()
    }

    pub fn rows(&self, d: usize) -> &[f32] {
        &self.x[self.offsets[d] * N_FEATURES..self.offsets[d + 1] * N_FEATURES]
    }

    pub fn labels(&self, d: usize) -> &[f32] {
        &self.y[self.offsets[d]..self.offsets[d + 1]]
    }
}

/// Huber loss with delta 1 and its derivative.
pub fn huber<T: Scalar>(e: T) -> (T, T) {
    let one = T::one();
    if e.abs() <= one {
        (T::lit(0.5) * e * e, e)
    } else {
        (e.abs() - T::lit(0.5), e.signum())
    }
}

/// Mean Huber loss over all rows in `ws` against `targets`; writes the
/// per-row loss gradient into `dq`.
fn loss_and_dq<T: Scalar>(ws: &Workspace<T>, targets: &[T], dq: &mut Vec<T>) -> T {
    let n = T::from_usize(targets.len()).unwrap();
    dq.clear();
    let mut total = T::zero();
    for (&q, &y) in ws.q.iter().zip(targets) {
        let (l, g) = huber(q - y);
        total = total + l;
        dq.push(g / n);
    }
    total / n
}

/// Adam state and scratch buffers for one model.
pub struct Trainer {
    pub model: DuelingModel<f32>,
    target: Option<DuelingModel<f32>>,
    gamma: f32,
    lr: f32,
    target_sync: usize,
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
    grad: Vec<f32>,
    ws: Workspace<f32>,
    tws: Workspace<f32>,
    targets: Vec<f32>,
    dq: Vec<f32>,
    /// Parameters held at zero (first-layer weights of ablated features).
    frozen: Vec<usize>,
}

const BETA1: f32 = 0.9;
const BETA2: f32 = 0.999;
const ADAM_EPS: f32 = 1e-8;

impl Trainer {
    pub fn new(model: DuelingModel<f32>, cfg: &TrainConfig) -> Self {
        let n = model.n_params();
        let target = (cfg.gamma > 0.0).then(|| model.clone());
        let h1 = model.layout().h1;
        let frozen = cfg.ablate.iter().flat_map(|&f| (0..h1).map(move |j| j * N_FEATURES + f)).collect();
        Self {
            model,
            target,
            gamma: cfg.gamma as f32,
            lr: cfg.lr as f32,
            target_sync: cfg.target_sync.max(1),
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            grad: vec![0.0; n],
            ws: Workspace::default(),
            tws: Workspace::default(),
            targets: Vec::new(),
            dq: Vec::new(),
            frozen,
        }
    }

    pub fn steps(&self) -> usize {
        self.t as usize
    }

    fn load_batch(&mut self, data: &Dataset, batch: &[usize]) {
        self.ws.clear();
        self.targets.clear();
        for &d in batch {
            self.ws.push_decision(data.rows(d));
            self.targets.extend_from_slice(data.labels(d));
        }
        let Some(target) = &self.target else { return };
        // y + gamma * max_j Q'(next state)
        self.tws.clear();
        let mut has_next = Vec::with_capacity(batch.len());
        for &d in batch {
            if let Some(n) = data.next[d] {
                self.tws.push_decision(data.rows(n));
                has_next.push(true);
            } else {
                has_next.push(false);
            }
        }
        if self.tws.offsets.len() > 1 {
            target.forward_batch(&mut self.tws);
        }
        let mut ni = 0;
        for (bi, &d) in batch.iter().enumerate() {
            if !has_next[bi] {
                continue;
            }
            let (s, e) = (self.tws.offsets[ni], self.tws.offsets[ni + 1]);
            let best = self.tws.q[s..e].iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let (ts, te) = (self.ws.offsets[bi], self.ws.offsets[bi + 1]);
            debug_assert_eq!(te - ts, data.labels(d).len());
            for y in &mut self.targets[ts..te] {
                *y += self.gamma * best;
            }
            ni += 1;
        }
    }

    /// Mean loss on `batch` without updating.
    pub fn loss(&mut self, data: &Dataset, batch: &[usize]) -> f32 {
        self.load_batch(data, batch);
        self.model.forward_batch(&mut self.ws);
        loss_and_dq(&self.ws, &self.targets, &mut self.dq)
    }

    /// One Adam step on `batch`; returns the loss before the update.
    pub fn step(&mut self, data: &Dataset, batch: &[usize]) -> f32 {
        let loss = self.loss(data, batch);
        self.model.backward(&mut self.ws, &self.dq, &mut self.grad);
        for &i in &self.frozen {
            self.grad[i] = 0.0;
        }
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t);
        let bc2 = 1.0 - BETA2.powi(self.t);
        let p = self.model.params_mut();
        for i in 0..p.len() {
            let g = self.grad[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            p[i] -= self.lr * mh / (vh.sqrt() + ADAM_EPS);
        }
        if let Some(target) = &mut self.target {
            if self.t as usize % self.target_sync == 0 {
                target.params_mut().copy_from_slice(self.model.params());
            }
        }
        loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub decisions: usize,
    pub rows: usize,
    /// Decisions actually sampled from after the replay-capacity cap.
    pub pool: usize,
    pub steps: usize,
    /// Mean batch loss of each epoch.
    pub epoch_loss: Vec<f32>,
}

impl TrainStats {
    pub fn final_loss(&self) -> f32 {
        self.epoch_loss.last().copied().unwrap_or(f32::NAN)
    }
}

/// Fits normalization on every raw feature row, then trains a freshly
/// initialized model. Single-threaded and deterministic for a fixed seed.
pub fn train(trajs: &[Trajectory], cfg: &TrainConfig) -> Result<(DuelingModel<f32>, TrainStats), ModelError> {
    cfg.validate()?;
    let decisions: usize = trajs.iter().map(|t| t.len()).sum();
    if decisions == 0 {
        return Err(ModelError::EmptyTrajectory);
    }
    let norm = fit_norm(trajs.iter().flat_map(|t| t.decisions.iter().flat_map(|d| d.raw.iter())))?;
    let data = Dataset::new(trajs, &norm);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = DuelingModel::init(cfg.hidden.0, cfg.hidden.1, &mut rng);
    for &f in &cfg.ablate {
        model.zero_feature(f);
    }
    model.norm = norm;
    model.k_trained = cfg.k as u8;

    let mut pool: Vec<usize> = (0..data.len()).collect();
    if pool.len() > cfg.replay_capacity {
        // partial Fisher-Yates, then restore order
        for i in 0..cfg.replay_capacity {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(cfg.replay_capacity);
        pool.sort_unstable();
    }

    let mut trainer = Trainer::new(model, cfg);
    let steps_per_epoch = pool.len().div_ceil(cfg.batch);
    let mut batch = vec![0usize; cfg.batch];
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut sum = 0.0f64;
        for _ in 0..steps_per_epoch {
            for b in batch.iter_mut() {
                *b = pool[rng.random_range(0..pool.len())];
            }
            sum += trainer.step(&data, &batch) as f64;
        }
        epoch_loss.push((sum / steps_per_epoch as f64) as f32);
    }
    let model = trainer.model;
    if !model.all_finite() {
        return Err(ModelError::NonFinite("trained weights"));
    }
    let stats = TrainStats {
        decisions,
        rows: trajs.iter().map(|t| t.n_rows()).sum(),
        pool: pool.len(),
        steps: epoch_loss.len() * steps_per_epoch,
        epoch_loss,
    };
    Ok((model, stats))
}

/// Per-round record of [`train_policy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    /// Decisions generated this round.
    pub decisions: usize,
    /// Hit ratio of the behavior policy during generation.
    pub behavior_hit_ratio: f64,
    pub train: TrainStats,
}

fn round_seed(seed: u64, round: usize, stream: u64) -> u64 {
    // splitmix64 finalizer over (seed, round, stream)
    let mut z = seed ^ (round as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stream.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Policy iteration: each round replays the trace under the current model
/// (LRU in round 0) mixed with LRU at rate `epsilon`, adds the labeled
/// decisions to the replay pool, and trains a fresh model on the pool.
pub fn train_policy(
    trace: &InternedTrace,
    capacity: u64,
    cfg: &TrainConfig,
) -> Result<(DuelingModel<f32>, Vec<RoundStats>), ModelError> {
    cfg.validate()?;
    let mut trajs: Vec<Trajectory> = Vec::new();
    let mut model: Option<DuelingModel<f32>> = None;
    let mut rounds = Vec::new();
    for round in 0..cfg.iterations {
        let gen = GenConfig { k: cfg.k, epsilon: cfg.epsilon, seed: round_seed(cfg.seed, round, 1) };
        let (traj, report): (Trajectory, SimReport) = generate_trajectories(trace, capacity, model.as_ref(), &gen)?;
        if traj.is_empty() && trajs.is_empty() {
            return Err(ModelError::EmptyTrajectory);
        }
        let decisions = traj.len();
        trajs.push(traj);
        let round_cfg = TrainConfig { seed: round_seed(cfg.seed, round, 2), ..cfg.clone() };
        let (m, stats) = train(&trajs, &round_cfg)?;
        rounds.push(RoundStats { round, decisions, behavior_hit_ratio: report.hit_ratio, train: stats });
        model = Some(m);
    }
    Ok((model.expect("at least one round"), rounds))
}

/// One decision of a gradient-check batch.
#[derive(Debug, Clone)]
pub struct GradSample {
    /// K x 6 rows.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub n_params: usize,
}

/// Gradients whose magnitude is below this are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;
const KINK_MARGIN: f64 = 1e-3;

fn batch_loss(model: &DuelingModel<f64>, batch: &[GradSample], ws: &mut Workspace<f64>, dq: &mut Vec<f64>) -> f64 {
    ws.clear();
    let mut targets = Vec::new();
    for s in batch {
        ws.push_decision(&s.x);
        targets.extend_from_slice(&s.y);
    }
    model.forward_batch(ws);
    loss_and_dq(ws, &targets, dq)
}

/// Shifts hidden biases (and targets) so no ReLU pre-activation and no
/// Huber residual sits within `KINK_MARGIN` of a kink.
fn nudge_off_kinks(model: &mut DuelingModel<f64>, batch: &mut [GradSample]) {
    let l = model.layout();
    let rows: Vec<&[f64]> = batch.iter().flat_map(|s| s.x.chunks_exact(N_FEATURES)).collect();
    for _ in 0..100 {
        let p = model.params().to_vec();
        let mut moved = false;
        let mut h1s = Vec::with_capacity(rows.len());
        for r in &rows {
            let mut h1 = vec![0.0; l.h1];
            for j in 0..l.h1 {
                let z = (0..N_FEATURES).map(|f| p[l.w1().start + j * N_FEATURES + f] * r[f]).sum::<f64>()
                    + p[l.b1().start + j];
                if z.abs() < KINK_MARGIN {
                    model.params_mut()[l.b1().start + j] += 3.0 * KINK_MARGIN;
                    moved = true;
                }
                h1[j] = z.max(0.0);
            }
            h1s.push(h1);
        }
        if moved {
            continue;
        }
        for h1 in &h1s {
            for j in 0..l.h2 {
                let z = (0..l.h1).map(|i| p[l.w2().start + j * l.h1 + i] * h1[i]).sum::<f64>() + p[l.b2().start + j];
                if z.abs() < KINK_MARGIN {
                    model.params_mut()[l.b2().start + j] += 3.0 * KINK_MARGIN;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    let mut ws = Workspace::default();
    let mut dq = Vec::new();
    batch_loss(model, batch, &mut ws, &mut dq);
    let mut r = 0;
    for s in batch.iter_mut() {
        for y in &mut s.y {
            let e = ws.q[r] - *y;
            if (e.abs() - 1.0).abs() < KINK_MARGIN {
                *y += 3.0 * KINK_MARGIN;
            }
            r += 1;
        }
    }
}

/// Compares analytic gradients of the mean Huber loss with central finite
/// differences (`h = 1e-5`) for every parameter. The relative error of one
/// parameter is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn grad_check(model: &DuelingModel<f64>, batch: &[GradSample]) -> GradCheck {
    const H: f64 = 1e-5;
    let mut model = model.clone();
    let mut batch = batch.to_vec();
    nudge_off_kinks(&mut model, &mut batch);

    let mut ws = Workspace::default();
    let mut dq = Vec::new();
    batch_loss(&model, &batch, &mut ws, &mut dq);
    let mut analytic = vec![0.0; model.n_params()];
    model.backward(&mut ws, &dq, &mut analytic);

    let mut worst = (0.0f64, 0usize);
    for i in 0..model.n_params() {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + H;
        let lp = batch_loss(&model, &batch, &mut ws, &mut dq);
        model.params_mut()[i] = orig - H;
        let lm = batch_loss(&model, &batch, &mut ws, &mut dq);
        model.params_mut()[i] = orig;
        let numeric = (lp - lm) / (2.0 * H);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    GradCheck { max_rel_error: worst.0, worst_param: worst.1, n_params: model.n_params() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(rng: &mut ChaCha8Rng, decisions: usize, k: usize) -> Vec<(Vec<[f32; 6]>, Vec<f32>)> {
        (0..decisions)
            .map(|_| {
                let rows: Vec<[f32; 6]> =
                    (0..k).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect();
                let labels = (0..k).map(|_| f32::from(rng.random_bool(0.5))).collect();
                (rows, labels)
            })
            .collect()
    }

    #[test]
    fn huber_pieces() {
        assert_eq!(huber(0.5f64), (0.125, 0.5));
        assert_eq!(huber(-3.0f64), (2.5, -1.0));
    }

    #[test]
    fn loss_decreases_on_a_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data = Dataset::from_rows(&random_batch(&mut rng, 256, 8));
        let cfg = TrainConfig::default();
        let model = DuelingModel::init(HIDDEN1, HIDDEN2, &mut rng);
        let mut tr = Trainer::new(model, &cfg);
        let batch: Vec<usize> = (0..256).collect();
        let first = tr.loss(&data, &batch);
        for _ in 0..100 {
            tr.step(&data, &batch);
        }
        assert!(tr.loss(&data, &batch) < first);
    }

    #[test]
    fn ablated_columns_stay_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = Dataset::from_rows(&random_batch(&mut rng, 32, 4));
        let mut model = DuelingModel::init(16, 8, &mut rng);
        model.zero_feature(1);
        let mut tr = Trainer::new(model, &TrainConfig { ablate: vec![1], ..Default::default() });
        let batch: Vec<usize> = (0..32).collect();
        for _ in 0..20 {
            tr.step(&data, &batch);
        }
        let l = tr.model.layout();
        assert!((0..l.h1).all(|j| tr.model.params()[j * N_FEATURES + 1] == 0.0));
    }

    #[test]
    fn grad_check_small_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = DuelingModel::<f64>::init(10, 6, &mut rng);
        let batch: Vec<GradSample> = (0..3)
            .map(|_| GradSample {
                x: (0..4 * N_FEATURES).map(|_| rng.random_range(-2.0..2.0)).collect(),
                y: (0..4).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect(),
            })
            .collect();
        let r = grad_check(&model, &batch);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { gamma: 1.0, ..Default::default() },
            TrainConfig { epsilon: 1.5, ..Default::default() },
            TrainConfig { k: 65, ..Default::default() },
            TrainConfig { ablate: vec![6], ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(ModelError::Config(_))));
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(train(&[], &TrainConfig::default()), Err(ModelError::EmptyTrajectory)));
    }
}
