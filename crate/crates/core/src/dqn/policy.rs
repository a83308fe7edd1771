//! The learned eviction policy: score the K-tail, evict the lowest Q.

use std::sync::Arc;

use super::mask::{mask_indices, select_mask};
use super::model::{DuelingModel, Workspace};
use crate::cache_sim::{CacheState, KeyId};
use crate::error::SimError;
use crate::features::{normalize, NormParams, N_FEATURES};
use crate::policies::{k_tail_candidates, Candidate, EvictionPolicy, Selection};

pub const DEFAULT_K: usize = 16;

/// Normalizes candidate rows into `out` (K x 6, candidate-major).
pub fn candidate_rows(cands: &[Candidate], norm: &NormParams, out: &mut Vec<f32>) {
    out.clear();
    for c in cands {
        out.extend_from_slice(&normalize(&c.raw, norm));
    }
}

/// Scores candidates with `model` and returns the eviction mask.
pub(crate) fn model_mask(
    model: &DuelingModel<f32>,
    cands: &[Candidate],
    needed: u64,
    rows: &mut Vec<f32>,
    sizes: &mut Vec<u64>,
    ws: &mut Workspace<f32>,
) -> Result<u64, SimError> {
    candidate_rows(cands, &model.norm, rows);
    sizes.clear();
    sizes.extend(cands.iter().map(|c| c.size));
    model
        .forward_into(rows, ws)
        .map_err(|e| SimError::Desync { policy: "coldrl".into(), detail: e.to_string() })?;
    Ok(select_mask(&ws.q, sizes, needed))
}

/// Keys of the candidates selected by `mask`, coldest first.
pub fn masked_keys(cands: &[Candidate], mask: u64) -> Vec<KeyId> {
    mask_indices(mask).take_while(|&i| i < cands.len()).map(|i| cands[i].key).collect()
}

/// In-process learned policy (`coldrl`).
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    model: Arc<DuelingModel<f32>>,
    k: usize,
    rows: Vec<f32>,
    sizes: Vec<u64>,
    ws: Workspace<f32>,
}

impl LearnedPolicy {
    pub fn new(model: Arc<DuelingModel<f32>>, k: usize) -> Self {
        assert!((1..=super::mask::MAX_K).contains(&k), "K must be in 1..=64");
        Self { model, k, rows: Vec::with_capacity(k * N_FEATURES), sizes: Vec::new(), ws: Workspace::default() }
    }

    /// Uses the K the model was trained with, or [`DEFAULT_K`].
    pub fn with_trained_k(model: Arc<DuelingModel<f32>>) -> Self {
        let k = if model.k_trained == 0 { DEFAULT_K } else { model.k_trained as usize };
        Self::new(model, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl EvictionPolicy for LearnedPolicy {
    fn name(&self) -> &str {
        "coldrl"
    }

    fn select_victims(&mut self, state: &CacheState, needed: u64) -> Result<Selection, SimError> {
        let cands = k_tail_candidates(state, self.k);
        if cands.is_empty() {
            return Ok(Selection::new(Vec::new()));
        }
        let mask = model_mask(&self.model, &cands, needed, &mut self.rows, &mut self.sizes, &mut self.ws)?;
        Ok(Selection::new(masked_keys(&cands, mask)))
    }
}
