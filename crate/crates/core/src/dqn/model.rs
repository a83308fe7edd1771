//! The dueling Q-network.
//!
//! Each candidate row `x_i` (6 normalized features) goes through a shared
//! trunk `h1 = relu(W1 x + b1)`, `h2 = relu(W2 h1 + b2)`. The advantage head
//! scores each row, `a_i = wa . h2_i + ba`; the value head reads the mean of
//! the `h2` rows, `v = wv . mean(h2) + bv`. Then `Q_i = v + a_i - mean(a)`.
//! Q is the keep-value of a candidate: victims are the lowest-Q rows.

use std::ops::Range;

use rand::Rng;

use super::scalar::{gemm, Scalar, View};
use crate::error::ModelError;
use crate::features::{NormParams, N_FEATURES};

pub const HIDDEN1: usize = 128;
pub const HIDDEN2: usize = 64;

/// Offsets of each tensor in the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub h1: usize,
    pub h2: usize,
}

impl Layout {
    pub fn w1(&self) -> Range<usize> {
        0..self.h1 * N_FEATURES
    }
    pub fn b1(&self) -> Range<usize> {
        let s = self.w1().end;
        s..s + self.h1
    }
    pub fn w2(&self) -> Range<usize> {
        let s = self.b1().end;
        s..s + self.h2 * self.h1
    }
    pub fn b2(&self) -> Range<usize> {
        let s = self.w2().end;
        s..s + self.h2
    }
    pub fn wa(&self) -> Range<usize> {
        let s = self.b2().end;
        s..s + self.h2
    }
    pub fn ba(&self) -> usize {
        self.wa().end
    }
    pub fn wv(&self) -> Range<usize> {
        let s = self.ba() + 1;
        s..s + self.h2
    }
    pub fn bv(&self) -> usize {
        self.wv().end
    }
    pub fn total(&self) -> usize {
        self.bv() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuelingModel<T = f32> {
    layout: Layout,
    params: Vec<T>,
    pub norm: NormParams,
    /// Candidate count the model was trained with; 0 if unknown.
    pub k_trained: u8,
}

impl<T: Scalar> DuelingModel<T> {
    /// All weights and biases zero.
    pub fn zeros(h1: usize, h2: usize) -> Self {
        let layout = Layout { h1, h2 };
        Self { layout, params: vec![T::zero(); layout.total()], norm: NormParams::default(), k_trained: 0 }
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn init<R: Rng + ?Sized>(h1: usize, h2: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(h1, h2);
        let l = m.layout;
        let mut fill = |range: Range<usize>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut m.params[range] {
                *p = T::lit(rng.random_range(-limit..=limit));
            }
        };
        fill(l.w1(), N_FEATURES, h1);
        fill(l.w2(), h1, h2);
        fill(l.wa(), h2, 1);
        fill(l.wv(), h2, 1);
        m
    }

    pub fn from_params(layout: Layout, params: Vec<T>, norm: NormParams, k_trained: u8) -> Self {
        assert_eq!(params.len(), layout.total(), "parameter count does not match layout");
        Self { layout, params, norm, k_trained }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn cast<U: Scalar>(&self) -> DuelingModel<U> {
        DuelingModel {
            layout: self.layout,
            params: self.params.iter().map(|p| U::lit(p.to_f64().unwrap())).collect(),
            norm: self.norm,
            k_trained: self.k_trained,
        }
    }

    /// Zeroes the first-layer weights reading feature `f`, removing it from
    /// the model's view.
    pub fn zero_feature(&mut self, f: usize) {
        for j in 0..self.layout.h1 {
            self.params[j * N_FEATURES + f] = T::zero();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Q-values for one decision; `x` holds `K` rows of 6 normalized features.
    pub fn q_values(&self, x: &[T]) -> Result<Vec<T>, ModelError> {
        Ok(self.forward(x)?.0)
    }

    /// Q-values and the state value `v` for one decision.
    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, T), ModelError> {
        let mut ws = Workspace::default();
        self.forward_into(x, &mut ws)?;
        Ok((ws.q.clone(), ws.v[0]))
    }

    /// Single-decision forward pass reusing `ws`; Q-values end up in `ws.q`.
    pub fn forward_into(&self, x: &[T], ws: &mut Workspace<T>) -> Result<(), ModelError> {
        if x.is_empty() || x.len() % N_FEATURES != 0 {
            return Err(ModelError::Malformed(format!("input length {} is not K x 6 with K >= 1", x.len())));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite("input features"));
        }
        ws.x.clear();
        ws.x.extend_from_slice(x);
        ws.offsets.clear();
        ws.offsets.extend_from_slice(&[0, x.len() / N_FEATURES]);
        self.forward_batch(ws);
        Ok(())
    }

    /// Forward pass over the decisions stacked in `ws.x`, delimited by
    /// `ws.offsets` (row offsets, one more than the number of decisions).
    pub fn forward_batch(&self, ws: &mut Workspace<T>) {
        let Layout { h1, h2 } = self.layout;
        let l = self.layout;
        let p = &self.params;
        let rows = ws.x.len() / N_FEATURES;
        let decisions = ws.offsets.len() - 1;
        ws.h1.resize(rows * h1, T::zero());
        ws.h2.resize(rows * h2, T::zero());
        ws.a.resize(rows, T::zero());
        ws.q.resize(rows, T::zero());
        ws.v.resize(decisions, T::zero());
        ws.hbar.resize(decisions * h2, T::zero());

        gemm(
            rows,
            N_FEATURES,
            h1,
            View::row_major(&ws.x, N_FEATURES),
            View::transposed(&p[l.w1()], N_FEATURES),
            T::zero(),
            &mut ws.h1,
        );
        bias_relu(&mut ws.h1, &p[l.b1()]);
        gemm(rows, h1, h2, View::row_major(&ws.h1, h1), View::transposed(&p[l.w2()], h1), T::zero(), &mut ws.h2);
        bias_relu(&mut ws.h2, &p[l.b2()]);

        let wa = &p[l.wa()];
        let wv = &p[l.wv()];
        // Q does not depend on ba
        for (r, a) in ws.a.iter_mut().enumerate() {
            *a = dot(&ws.h2[r * h2..(r + 1) * h2], wa);
        }
        for d in 0..decisions {
            let (s, e) = (ws.offsets[d], ws.offsets[d + 1]);
            let k = T::from_usize(e - s).unwrap();
            let hbar = &mut ws.hbar[d * h2..(d + 1) * h2];
            hbar.fill(T::zero());
            for r in s..e {
                for (hb, &h) in hbar.iter_mut().zip(&ws.h2[r * h2..(r + 1) * h2]) {
                    *hb = *hb + h;
                }
            }
            for hb in hbar.iter_mut() {
                *hb = *hb / k;
            }
            let v = dot(hbar, wv) + p[l.bv()];
            let a_mean = ws.a[s..e].iter().fold(T::zero(), |acc, &a| acc + a) / k;
            ws.v[d] = v;
            for r in s..e {
                ws.q[r] = v + ws.a[r] - a_mean;
            }
        }
    }

    /// Gradient of `sum_i dq_i * Q_i` with respect to every parameter, using
    /// the activations left in `ws` by [`forward_batch`](Self::forward_batch).
    /// `grad` is overwritten.
    pub fn backward(&self, ws: &mut Workspace<T>, dq: &[T], grad: &mut [T]) {
        let Layout { h1, h2 } = self.layout;
        let l = self.layout;
        let p = &self.params;
        let rows = ws.q.len();
        assert_eq!(dq.len(), rows);
        assert_eq!(grad.len(), l.total());
        grad.fill(T::zero());
        ws.dh2.clear();
        ws.dh2.resize(rows * h2, T::zero());
        let wa = &p[l.wa()];
        let wv = &p[l.wv()];

        for d in 0..ws.offsets.len() - 1 {
            let (s, e) = (ws.offsets[d], ws.offsets[d + 1]);
            let k = T::from_usize(e - s).unwrap();
            let dv = dq[s..e].iter().fold(T::zero(), |acc, &g| acc + g);
            grad[l.bv()] = grad[l.bv()] + dv;
            for (g, &hb) in grad[l.wv()].iter_mut().zip(&ws.hbar[d * h2..(d + 1) * h2]) {
                *g = *g + dv * hb;
            }
            let dv_row = dv / k;
            for r in s..e {
                let da = dq[r] - dv_row;
                let h2r = &ws.h2[r * h2..(r + 1) * h2];
                for (g, &h) in grad[l.wa()].iter_mut().zip(h2r) {
                    *g = *g + da * h;
                }
                let dh = &mut ws.dh2[r * h2..(r + 1) * h2];
                for j in 0..h2 {
                    dh[j] = da * wa[j] + dv_row * wv[j];
                }
            }
        }

        relu_mask(&mut ws.dh2, &ws.h2);
        col_sums(&ws.dh2, h2, &mut grad[l.b2()]);
        gemm(
            h2,
            rows,
            h1,
            View::transposed(&ws.dh2, h2),
            View::row_major(&ws.h1, h1),
            T::zero(),
            &mut grad[l.w2()],
        );
        ws.dh1.clear();
        ws.dh1.resize(rows * h1, T::zero());
        gemm(rows, h2, h1, View::row_major(&ws.dh2, h2), View::row_major(&p[l.w2()], h1), T::zero(), &mut ws.dh1);
        relu_mask(&mut ws.dh1, &ws.h1);
        col_sums(&ws.dh1, h1, &mut grad[l.b1()]);
        gemm(
            h1,
            rows,
            N_FEATURES,
            View::transposed(&ws.dh1, h1),
            View::row_major(&ws.x, N_FEATURES),
            T::zero(),
            &mut grad[l.w1()],
        );
    }
}

/// Activation buffers reused across forward and backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    /// Stacked input rows, `rows x 6`.
    pub x: Vec<T>,
    /// Row offsets of each decision; `offsets.len() = decisions + 1`.
    pub offsets: Vec<usize>,
    pub h1: Vec<T>,
    pub h2: Vec<T>,
    pub a: Vec<T>,
    pub q: Vec<T>,
    pub v: Vec<T>,
    hbar: Vec<T>,
    dh1: Vec<T>,
    dh2: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn clear(&mut self) {
        self.x.clear();
        self.offsets.clear();
        self.offsets.push(0);
    }

    /// Appends one decision's rows.
    pub fn push_decision(&mut self, rows: &[T]) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.x.extend_from_slice(rows);
        self.offsets.push(self.x.len() / N_FEATURES);
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn bias_relu<T: Scalar>(m: &mut [T], bias: &[T]) {
    for row in m.chunks_exact_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            let z = *v + b;
            *v = if z > T::zero() { z } else { T::zero() };
        }
    }
}

fn relu_mask<T: Scalar>(grad: &mut [T], act: &[T]) {
    for (g, &a) in grad.iter_mut().zip(act) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

fn col_sums<T: Scalar>(m: &[T], cols: usize, out: &mut [T]) {
    out.fill(T::zero());
    for row in m.chunks_exact(cols) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_count() {
        let m = DuelingModel::<f32>::zeros(HIDDEN1, HIDDEN2);
        assert_eq!(m.n_params(), 6 * 128 + 128 + 128 * 64 + 64 + 64 + 1 + 64 + 1);
        assert_eq!(m.n_params(), 9282);
    }

    #[test]
    fn identical_rows_give_q_equal_v() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DuelingModel::<f64>::init(HIDDEN1, HIDDEN2, &mut rng);
        let row = [0.3, -1.0, 2.0, 0.1, 0.0, -0.5];
        let x: Vec<f64> = row.iter().copied().cycle().take(6 * 5).collect();
        let (q, v) = m.forward(&x).unwrap();
        assert!(q.iter().all(|&qi| (qi - v).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_input() {
        let m = DuelingModel::<f32>::zeros(4, 3);
        assert!(matches!(m.forward(&[]), Err(ModelError::Malformed(_))));
        assert!(matches!(m.forward(&[0.0; 7]), Err(ModelError::Malformed(_))));
        let mut x = [0.0f32; 6];
        x[2] = f32::NAN;
        assert!(matches!(m.forward(&x), Err(ModelError::NonFinite(_))));
    }

    #[test]
    fn zero_model_has_zero_gradient() {
        let m = DuelingModel::<f64>::zeros(8, 4);
        let mut ws = Workspace::default();
        ws.clear();
        ws.push_decision(&[0.5; 12]);
        m.forward_batch(&mut ws);
        let mut g = vec![1.0; m.n_params()];
        m.backward(&mut ws, &[0.0, 0.0], &mut g);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zeroed_feature_is_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = DuelingModel::<f32>::init(16, 8, &mut rng);
        m.zero_feature(1);
        let x1 = [0.1, 5.0, 0.2, 0.3, 0.4, 0.5, 0.9, -5.0, 0.8, 0.7, 0.6, 0.5];
        let mut x2 = x1;
        x2[1] = -3.0;
        x2[7] = 2.0;
        assert_eq!(m.q_values(&x1).unwrap(), m.q_values(&x2).unwrap());
    }
}
