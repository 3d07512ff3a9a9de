//! Small neural network stack: one valid-mode convolution layer, dense
//! layers, ReLU, inverted dropout and softmax cross-entropy, with mini-batch
//! training and early stopping.
//!
//! Layers are generic over [`Real`] so the same code trains in `f32` and is
//! gradient-checked in `f64`.

mod io;
mod layers;
mod network;
mod train;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use io::{load_model, read_model, save_model, write_history_csv, write_model};
pub use layers::{Conv2d, Dense};
pub use network::{max_gradient_error, Network};
pub use train::{
    evaluate, predict, predict_dataset, stratified_split, train, EpochStats, OptimizerConfig, OptimizerKind,
    Optimizer, TrainConfig, TrainedModel, MAX_EPOCHS_LIMIT,
};

pub trait Real:
    Float + FromPrimitive + LinalgScalar + ScalarOperand + Debug + Default + Sum + AddAssign + MulAssign + Send + Sync + 'static
{
}
impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn cast<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("finite conversion")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnSpec {
    pub h1: usize,
    pub w1: usize,
    pub k: usize,
    pub n_k: usize,
    pub n_d: usize,
    pub dropout_p: f64,
}

impl CnnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.h1 == 0 || self.w1 == 0 || self.k == 0 || self.n_k == 0 || self.n_d == 0 {
            return Err(Error::invalid(format!("CNN dimensions must be positive: {self:?}")));
        }
        if self.k > self.h1.min(self.w1) {
            return Err(Error::invalid(format!(
                "kernel side {} exceeds input {}x{}",
                self.k, self.h1, self.w1
            )));
        }
        check_dropout(self.dropout_p)
    }

    /// Valid-mode output dims `(h1 − k + 1, w1 − k + 1)`.
    pub fn out_dims(&self) -> (usize, usize) {
        (self.h1 + 1 - self.k, self.w1 + 1 - self.k)
    }

    pub fn flat_dim(&self) -> usize {
        let (h2, w2) = self.out_dims();
        h2 * w2 * self.n_k
    }

    pub fn n_params(&self) -> usize {
        self.n_k * (self.k * self.k + 1) + (self.flat_dim() + 1) * self.n_d + (self.n_d + 1) * 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub h1: usize,
    pub w1: usize,
    pub l: usize,
    pub m: usize,
    pub dropout_p: f64,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.h1 == 0 || self.w1 == 0 || self.l == 0 || self.m == 0 {
            return Err(Error::invalid(format!("MLP dimensions must be positive: {self:?}")));
        }
        check_dropout(self.dropout_p)
    }

    pub fn input_dim(&self) -> usize {
        self.h1 * self.w1
    }

    pub fn n_params(&self) -> usize {
        (self.input_dim() + 1) * self.l + (self.l + 1) * self.m + (self.m + 1) * 2
    }
}

fn check_dropout(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("dropout probability {p} outside [0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Cnn(CnnSpec),
    Mlp(MlpSpec),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Cnn(s) => s.validate(),
            ModelSpec::Mlp(s) => s.validate(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Cnn(_) => "cnn",
            ModelSpec::Mlp(_) => "mlp",
        }
    }

    pub fn input_dims(&self) -> (usize, usize) {
        match self {
            ModelSpec::Cnn(s) => (s.h1, s.w1),
            ModelSpec::Mlp(s) => (s.h1, s.w1),
        }
    }

    pub fn dropout_p(&self) -> f64 {
        match self {
            ModelSpec::Cnn(s) => s.dropout_p,
            ModelSpec::Mlp(s) => s.dropout_p,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            ModelSpec::Cnn(s) => s.n_params(),
            ModelSpec::Mlp(s) => s.n_params(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Single-sample valid-mode cross-correlation: `Y[i,j,p] = Σ X[i+a, j+b] W_p[a,b] + b_p`.
/// `kernels` is `N_k × k × k`; the result is `h2 × w2 × N_k`.
pub fn conv2d_forward<T: Real>(x: ArrayView2<'_, T>, kernels: ArrayView3<'_, T>, bias: ArrayView1<'_, T>) -> Result<Array3<T>> {
    let (h1, w1) = x.dim();
    let (n_k, k, k2) = kernels.dim();
    if k != k2 || bias.len() != n_k {
        return Err(Error::shape(
            format!("{n_k} square kernels and {n_k} biases"),
            format!("kernels {n_k}x{k}x{k2}, {} biases", bias.len()),
        ));
    }
    if k == 0 || k > h1 || k > w1 {
        return Err(Error::invalid(format!("kernel side {k} does not fit input {h1}x{w1}")));
    }
    let (h2, w2) = (h1 + 1 - k, w1 + 1 - k);
    Ok(Array3::from_shape_fn((h2, w2, n_k), |(i, j, p)| {
        let mut s = bias[p];
        for a in 0..k {
            for b in 0..k {
                s += x[[i + a, j + b]] * kernels[[p, a, b]];
            }
        }
        s
    }))
}

/// `φ(Wx + b)` with `W` of shape `n × m`.
pub fn dense_forward<T: Real>(x: ArrayView1<'_, T>, w: ArrayView2<'_, T>, b: ArrayView1<'_, T>, act: Activation) -> Result<Array1<T>> {
    let (n, m) = w.dim();
    if x.len() != m || b.len() != n {
        return Err(Error::shape(
            format!("input {m}, bias {n}"),
            format!("input {}, bias {}", x.len(), b.len()),
        ));
    }
    let mut y = w.dot(&x) + b;
    if act == Activation::Relu {
        relu_inplace(&mut y);
    }
    Ok(y)
}

pub(crate) fn relu_inplace<T: Real, D: ndarray::Dimension>(a: &mut ndarray::Array<T, D>) {
    a.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

/// Row-wise softmax with max subtraction, mean negative log-likelihood, and
/// its gradient `(p − y) / batch` with respect to the logits.
pub fn softmax_xent<T: Real>(logits: ArrayView2<'_, T>, one_hot: ArrayView2<'_, T>) -> (Array2<T>, T, Array2<T>) {
    let n = logits.nrows();
    let mut probs = logits.to_owned();
    let mut loss = T::zero();
    for ((mut row, z), target) in probs.rows_mut().into_iter().zip(logits.rows()).zip(one_hot.rows()) {
        let mx = z.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - mx).exp());
        let log_s = row.sum().ln();
        // log p_c = (z_c − max) − ln Σ, finite even when p_c underflows
        for ((&zc, &t), p) in z.iter().zip(target).zip(row.iter_mut()) {
            let log_p = zc - mx - log_s;
            if t != T::zero() {
                loss = loss - t * log_p;
            }
            *p = log_p.exp();
        }
    }
    let inv = cast::<T>(1.0 / n.max(1) as f64);
    let grad = (&probs - &one_hot) * inv;
    (probs, loss * inv, grad)
}

/// Inverted-dropout keep mask: each entry is `0` with probability `p`,
/// otherwise `1 / (1 − p)`.
pub fn dropout_mask<T: Real>(shape: (usize, usize), p: f64, rng: &mut Rng) -> Array2<T> {
    let keep = cast::<T>(1.0 / (1.0 - p));
    Array2::from_shape_simple_fn(shape, || if p > 0.0 && rng.random::<f64>() < p { T::zero() } else { keep })
}

pub fn dropout_apply<T: Real>(x: ArrayView2<'_, T>, p: f64, mode: Mode, rng: &mut Rng) -> Array2<T> {
    if mode == Mode::Eval || p == 0.0 {
        return x.to_owned();
    }
    &x * &dropout_mask::<T>(x.dim(), p, rng)
}

#[cfg(test)]
mod tests;
