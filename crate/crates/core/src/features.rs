//! The six per-candidate eviction features and their normalization.
//!
//! Feature order is a public contract shared by the wire protocol, the model
//! file, and trajectories: `age, size, hit_count, inter_arrival,
//! ttl_remaining, origin_rtt`.

use serde::{Deserialize, Serialize};

use crate::cache_sim::CacheEntry;
use crate::error::FeatureError;

pub const N_FEATURES: usize = 6;

pub const FEATURE_NAMES: [&str; N_FEATURES] =
    ["age", "size", "hit_count", "inter_arrival", "ttl_remaining", "origin_rtt"];

/// Index of the size feature in [`FEATURE_NAMES`].
pub const SIZE_FEATURE: usize = 1;

pub const DEFAULT_CLAMP: f32 = 8.0;
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RawFeatures {
    /// Seconds since insertion.
    pub age: f64,
    pub size: f64,
    /// Hits since insertion.
    pub hit_count: f64,
    /// Mean gap between accesses, `age / max(hit_count, 1)`.
    pub inter_arrival: f64,
    pub ttl_remaining: f64,
    /// Milliseconds.
    pub origin_rtt: f64,
}

impl RawFeatures {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [self.age, self.size, self.hit_count, self.inter_arrival, self.ttl_remaining, self.origin_rtt]
    }

    pub fn from_array(a: [f64; N_FEATURES]) -> Self {
        Self {
            age: a[0],
            size: a[1],
            hit_count: a[2],
            inter_arrival: a[3],
            ttl_remaining: a[4],
            origin_rtt: a[5],
        }
    }
}

/// Reads the features of a resident entry at time `now`.
pub fn extract(entry: &CacheEntry, now: f64) -> RawFeatures {
    let age = (now - entry.inserted_at).max(0.0);
    let hits = entry.hit_count as f64;
    RawFeatures {
        age,
        size: entry.size as f64,
        hit_count: hits,
        inter_arrival: age / hits.max(1.0),
        ttl_remaining: (entry.expires_at - now).max(0.0),
        origin_rtt: entry.origin_rtt.max(0.0),
    }
}

/// Per-feature standardization constants over `ln(1 + x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub mu: [f32; N_FEATURES],
    pub sigma: [f32; N_FEATURES],
    pub clamp: f32,
}

impl Default for NormParams {
    /// Identity standardization (`mu = 0`, `sigma = 1`).
    fn default() -> Self {
        Self { mu: [0.0; N_FEATURES], sigma: [1.0; N_FEATURES], clamp: DEFAULT_CLAMP }
    }
}

impl NormParams {
    /// `x' = clamp((ln(1+x) - mu) / sigma, -c, c)` for one feature.
    pub fn normalize_one(&self, feature: usize, x: f64) -> f32 {
        let z = ((x.max(0.0).ln_1p() as f32) - self.mu[feature]) / self.sigma[feature];
        z.clamp(-self.clamp, self.clamp)
    }

    /// Inverse of [`normalize_one`](Self::normalize_one) for unclamped values.
    pub fn denormalize_one(&self, feature: usize, z: f32) -> f64 {
        let l = z as f64 * self.sigma[feature] as f64 + self.mu[feature] as f64;
        l.exp_m1().max(0.0)
    }
}

/// Fits mean and population standard deviation of `ln(1 + x)` per feature.
pub fn fit_norm<'a, I>(dataset: I) -> Result<NormParams, FeatureError>
where
    I: IntoIterator<Item = &'a RawFeatures>,
{
    let mut n = 0usize;
    let mut sum = [0.0f64; N_FEATURES];
    let mut sum_sq = [0.0f64; N_FEATURES];
    let mut rows = Vec::new();
    for raw in dataset {
        let a = raw.to_array().map(|x| x.max(0.0).ln_1p());
        for f in 0..N_FEATURES {
            sum[f] += a[f];
        }
        rows.push(a);
        n += 1;
    }
    if n == 0 {
        return Err(FeatureError::EmptyDataset);
    }
    let mean = sum.map(|s| s / n as f64);
    // second pass for a stable variance
    for a in &rows {
        for f in 0..N_FEATURES {
            let d = a[f] - mean[f];
            sum_sq[f] += d * d;
        }
    }
    let mut p = NormParams::default();
    for f in 0..N_FEATURES {
        p.mu[f] = mean[f] as f32;
        p.sigma[f] = (sum_sq[f] / n as f64).sqrt().max(SIGMA_FLOOR) as f32;
    }
    Ok(p)
}

/// Normalized feature row in the fixed feature order.
pub fn normalize(raw: &RawFeatures, p: &NormParams) -> [f32; N_FEATURES] {
    let a = raw.to_array();
    std::array::from_fn(|f| p.normalize_one(f, a[f]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(inserted_at: f64, hit_count: u32, ttl: f64) -> CacheEntry {
        CacheEntry {
            key: 0,
            size: 100,
            inserted_at,
            last_access: inserted_at,
            hit_count,
            expires_at: inserted_at + ttl,
            origin_rtt: 12.0,
            seq: 0,
        }
    }

    #[test]
    fn fresh_entry() {
        let f = extract(&entry(5.0, 0, 30.0), 5.0);
        assert_eq!(f.age, 0.0);
        assert_eq!(f.inter_arrival, 0.0);
        assert_eq!(f.ttl_remaining, 30.0);
        assert_eq!(f.size, 100.0);
        assert_eq!(f.origin_rtt, 12.0);
    }

    #[test]
    fn ttl_remaining_clamps_at_zero() {
        assert_eq!(extract(&entry(0.0, 0, 10.0), 50.0).ttl_remaining, 0.0);
    }

    #[test]
    fn mean_gap_inter_arrival() {
        let f = extract(&entry(0.0, 4, 1000.0), 100.0);
        assert_eq!(f.age, 100.0);
        assert_eq!(f.inter_arrival, 25.0);
    }

    #[test]
    fn fit_rejects_empty() {
        assert!(matches!(fit_norm(&[]), Err(FeatureError::EmptyDataset)));
    }

    #[test]
    fn constant_column_floors_sigma() {
        let rows = vec![RawFeatures::from_array([3.0; 6]); 4];
        let p = fit_norm(&rows).unwrap();
        for f in 0..N_FEATURES {
            assert_eq!(p.sigma[f], SIGMA_FLOOR as f32);
            assert_eq!(p.mu[f], 4f64.ln() as f32);
        }
        assert!(normalize(&rows[0], &p).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn single_row_fit() {
        let row = RawFeatures::from_array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = fit_norm(&[row]).unwrap();
        for f in 0..N_FEATURES {
            assert_eq!(p.mu[f], ((f + 1) as f64).ln_1p() as f32);
            assert_eq!(p.sigma[f], SIGMA_FLOOR as f32);
        }
    }

    #[test]
    fn two_point_population_std() {
        let e1 = std::f64::consts::E - 1.0;
        let p = fit_norm(&[RawFeatures::from_array([0.0; 6]), RawFeatures::from_array([e1; 6])]).unwrap();
        for f in 0..N_FEATURES {
            assert!((p.mu[f] - 0.5).abs() < 1e-7);
            assert!((p.sigma[f] - 0.5).abs() < 1e-7);
        }
    }

    #[test]
    fn centering_and_clamping() {
        let p = NormParams { mu: [2.0; 6], sigma: [0.5; 6], clamp: 8.0 };
        let centered = RawFeatures::from_array([(2.0f64).exp_m1(); 6]);
        assert!(normalize(&centered, &p).iter().all(|z| z.abs() < 1e-6));
        let huge = RawFeatures::from_array([1e30; 6]);
        assert!(normalize(&huge, &p).iter().all(|&z| z == 8.0));
        let tiny = RawFeatures::from_array([0.0; 6]);
        assert!(normalize(&tiny, &p).iter().all(|&z| z == -4.0));
    }

    #[test]
    fn identity_params_give_log1p() {
        let raw = RawFeatures::from_array([0.5, 10.0, 2.0, 100.0, 3.0, 7.0]);
        let z = normalize(&raw, &NormParams::default());
        for (zf, x) in z.iter().zip(raw.to_array()) {
            assert!((*zf - x.ln_1p() as f32).abs() < 1e-6);
        }
    }

    #[test]
    fn denormalize_inverts() {
        let p = NormParams { mu: [3.0; 6], sigma: [2.0; 6], clamp: 8.0 };
        let x = 262144.0;
        let back = p.denormalize_one(1, p.normalize_one(1, x));
        assert!((back / x - 1.0).abs() < 1e-5);
    }

    proptest::proptest! {
        #[test]
        fn normalize_is_monotone(a in 0.0f64..1e9, b in 0.0f64..1e9, f in 0usize..6) {
            let p = NormParams { mu: [1.5; 6], sigma: [0.7; 6], clamp: 8.0 };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(p.normalize_one(f, lo) <= p.normalize_one(f, hi));
        }

        #[test]
        fn extract_is_finite_and_non_negative(
            ins in 0.0f64..1e6, dt in 0.0f64..1e6, hits in 0u32..10_000, ttl in 1e-3f64..1e6,
        ) {
            let f = extract(&entry(ins, hits, ttl), ins + dt);
            for v in f.to_array() {
                proptest::prop_assert!(v.is_finite() && v >= 0.0);
            }
        }
    }
}
