//! Dense f32 matrices, a seeded RNG, the Adam optimizer, and the small
//! numerical kernels (softmax, categorical sampling) the models are built on.
//!
//! Parameters are stored as 32-bit reals; reductions that feed user-visible
//! numbers (norms, softmax sums) accumulate in 64-bit.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f32`. Vectors are matrices with one row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a row-major buffer; the length must be `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "buffer length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn same_shape(&self, other: &DenseMatrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill(&mut self, v: f32) {
        self.data.fill(v);
    }

    /// `self[row] += scale * values`.
    pub fn add_scaled_row(&mut self, row: usize, values: &[f32], scale: f32) {
        debug_assert_eq!(values.len(), self.cols);
        for (dst, &v) in self.row_mut(row).iter_mut().zip(values) {
            *dst += scale * v;
        }
    }

    /// `self += scale * other`, elementwise over the whole buffer.
    pub fn add_scaled(&mut self, other: &DenseMatrix, scale: f32) {
        debug_assert!(self.same_shape(other));
        for (dst, &v) in self.data.iter_mut().zip(&other.data) {
            *dst += scale * v;
        }
    }

    /// L2 norm of one row, accumulated in f64.
    pub fn row_norm(&self, r: usize) -> f64 {
        self.row(r)
            .iter()
            .map(|&x| x as f64 * x as f64)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Deterministic, explicitly seeded random stream.
///
/// Identical seeds yield identical draw sequences on every platform; there is
/// no process-global state.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform f32 in [0, 1).
    pub fn uniform_f32(&mut self) -> f32 {
        (self.inner.next_u32() >> 8) as f32 * (1.0 / (1u32 << 24) as f32)
    }

    /// Uniform f64 in [0, 1).
    pub fn uniform_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f32 in [lo, hi).
    pub fn uniform_range(&mut self, lo: f32, hi: f32) -> f32 {
        lo + (hi - lo) * self.uniform_f32()
    }

    /// Unbiased uniform integer in [0, n). Panics if n == 0.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = (u64::MAX / n) * n;
        loop {
            let x = self.inner.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    pub fn coin(&mut self) -> bool {
        self.inner.next_u64() & 1 == 1
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

/// Per-tensor Adam state: first/second moment buffers and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: DenseMatrix,
    pub v: DenseMatrix,
    pub step_count: u64,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl AdamState {
    /// Fresh state with the usual defaults (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamState {
            m: DenseMatrix::zeros(rows, cols),
            v: DenseMatrix::zeros(rows, cols),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_param(param: &DenseMatrix) -> Self {
        AdamState::new(param.rows(), param.cols())
    }
}

/// One Adam update with bias correction: descends `param` along `grad`.
pub fn adam_step(
    param: &mut DenseMatrix,
    grad: &DenseMatrix,
    state: &mut AdamState,
    lr: f32,
) -> Result<()> {
    if !param.same_shape(grad) || !param.same_shape(&state.m) {
        return Err(Error::contract(format!(
            "adam_step shape mismatch: param {}x{}, grad {}x{}, state {}x{}",
            param.rows(),
            param.cols(),
            grad.rows(),
            grad.cols(),
            state.m.rows(),
            state.m.cols(),
        )));
    }
    if lr <= 0.0 {
        return Err(Error::contract(format!(
            "adam_step lr must be > 0, got {lr}"
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = (1.0 - (state.beta1 as f64).powi(t)) as f32;
    let bc2 = (1.0 - (state.beta2 as f64).powi(t)) as f32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let p = param.data_mut();
    let g = grad.data();
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Numerically stable softmax: subtracts the max logit, accumulates in f64.
pub fn softmax(logits: &[f32]) -> Result<Vec<f32>> {
    if logits.is_empty() {
        return Err(Error::contract("softmax of empty logits"));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract("softmax input contains NaN/Inf"));
    }
    let max = logits.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
    let exps: Vec<f64> = logits.iter().map(|&x| (x as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|&e| (e / sum) as f32).collect())
}

/// Draw an index from a categorical distribution via inverse CDF on one
/// uniform draw. `probs` must sum to 1 within 1e-4.
pub fn sample_categorical(probs: &[f32], rng: &mut Rng) -> Result<usize> {
    let u = rng.uniform_f64();
    sample_categorical_with(probs, u)
}

/// Inverse-CDF sampling with a caller-supplied uniform in [0, 1).
pub fn sample_categorical_with(probs: &[f32], u: f64) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::contract("empty categorical distribution"));
    }
    let total: f64 = probs.iter().map(|&p| p as f64).sum();
    if (total - 1.0).abs() > 1e-4 {
        return Err(Error::contract(format!(
            "categorical probabilities sum to {total}, expected 1"
        )));
    }
    let mut acc = 0.0f64;
    for (i, &p) in probs.iter().enumerate() {
        acc += p as f64;
        if u < acc {
            return Ok(i);
        }
    }
    // u landed in the rounding slack past the final cumulative value; return
    // the last index with nonzero mass.
    for (i, &p) in probs.iter().enumerate().rev() {
        if p > 0.0 {
            return Ok(i);
        }
    }
    Err(Error::contract("categorical distribution has no mass"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_reference_value() {
        // Hand-computed single-parameter step: m=0.1, v=0.001, bias-corrected
        // to m_hat=1, v_hat=1 => param moves by lr/(1+eps).
        let mut p = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let g = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let mut st = AdamState::for_param(&p);
        adam_step(&mut p, &g, &mut st, 0.001).unwrap();
        assert!((p.get(0, 0) - 0.999).abs() < 1e-6, "got {}", p.get(0, 0));
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn adam_zero_grad_fresh_state_is_noop() {
        let mut p = DenseMatrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let before = p.clone();
        let g = DenseMatrix::zeros(1, 3);
        let mut st = AdamState::for_param(&p);
        adam_step(&mut p, &g, &mut st, 0.01).unwrap();
        assert_eq!(p, before);
        assert!(st.m.data().iter().all(|&x| x == 0.0));
        assert!(st.v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn adam_elementwise_independence() {
        let mut joint = DenseMatrix::from_vec(1, 2, vec![1.0, -2.0]).unwrap();
        let grad = DenseMatrix::from_vec(1, 2, vec![0.3, -0.7]).unwrap();
        let mut st = AdamState::for_param(&joint);
        for _ in 0..5 {
            adam_step(&mut joint, &grad, &mut st, 0.01).unwrap();
        }

        let mut split = Vec::new();
        for i in 0..2 {
            let mut p = DenseMatrix::from_vec(1, 1, vec![[1.0, -2.0][i]]).unwrap();
            let g = DenseMatrix::from_vec(1, 1, vec![[0.3, -0.7][i]]).unwrap();
            let mut s = AdamState::for_param(&p);
            for _ in 0..5 {
                adam_step(&mut p, &g, &mut s, 0.01).unwrap();
            }
            split.push(p.get(0, 0));
        }
        assert_eq!(joint.data(), split.as_slice());
    }

    #[test]
    fn adam_shape_mismatch_is_contract_error() {
        let mut p = DenseMatrix::zeros(2, 2);
        let g = DenseMatrix::zeros(2, 3);
        let mut st = AdamState::for_param(&p);
        assert!(adam_step(&mut p, &g, &mut st, 0.01).is_err());
    }

    #[test]
    fn adam_bit_identical_across_runs() {
        let run = || {
            let mut p = DenseMatrix::from_vec(1, 4, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
            let g = DenseMatrix::from_vec(1, 4, vec![-0.5, 0.25, 0.0, 1.5]).unwrap();
            let mut st = AdamState::for_param(&p);
            for _ in 0..17 {
                adam_step(&mut p, &g, &mut st, 0.003).unwrap();
            }
            p.data().to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn softmax_uniform_on_zero_logits() {
        let p = softmax(&[0.0; 5]).unwrap();
        for &x in &p {
            assert!((x - 0.2).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_two_logit_closed_form() {
        let c = 1.3f64;
        let p = softmax(&[0.4, 0.4 + c as f32]).unwrap();
        assert!((p[0] as f64 - 1.0 / (1.0 + c.exp())).abs() < 1e-6);
        assert!((p[1] as f64 - c.exp() / (1.0 + c.exp())).abs() < 1e-6);
    }

    #[test]
    fn softmax_shift_invariance() {
        let logits = [0.1f32, -2.0, 3.5, 0.0];
        let shifted: Vec<f32> = logits.iter().map(|x| x + 1000.0).collect();
        let a = softmax(&logits).unwrap();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_rejects_nan() {
        assert!(softmax(&[0.0, f32::NAN]).is_err());
    }

    #[test]
    fn categorical_degenerate_distribution() {
        let mut rng = Rng::seed_from_u64(7);
        for _ in 0..50 {
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn categorical_empty_is_error() {
        let mut rng = Rng::seed_from_u64(7);
        assert!(sample_categorical(&[], &mut rng).is_err());
    }

    #[test]
    fn categorical_fair_coin_frequency() {
        // Binomial(1e5, 0.5): observed frequency within +-0.01 of 0.5 with
        // overwhelming probability (6+ sigma).
        let mut rng = Rng::seed_from_u64(20240611);
        let n = 100_000;
        let mut zeros = 0usize;
        for _ in 0..n {
            if sample_categorical(&[0.5, 0.5], &mut rng).unwrap() == 0 {
                zeros += 1;
            }
        }
        let f = zeros as f64 / n as f64;
        assert!((0.49..=0.51).contains(&f), "frequency {f}");
    }

    #[test]
    fn rng_same_seed_same_sequence() {
        let mut a = Rng::seed_from_u64(99);
        let mut b = Rng::seed_from_u64(99);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = Rng::seed_from_u64(99);
        let mut d = Rng::seed_from_u64(99);
        for _ in 0..100 {
            assert_eq!(c.below(17), d.below(17));
            assert_eq!(c.uniform_f32().to_bits(), d.uniform_f32().to_bits());
        }
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            assert!(rng.below(7) < 7);
        }
    }
}
