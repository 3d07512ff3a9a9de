use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand::Rng as _;

use super::layers::{Conv2d, Dense};
use super::{cast, relu_inplace, softmax_xent, ModelSpec, Real};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Either `conv → ReLU → dense(N_d) → ReLU → dropout → dense(2)` or
/// `dense(L) → ReLU → dense(M) → ReLU → dropout → dense(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub spec: ModelSpec,
    pub conv: Option<Conv2d<T>>,
    pub dense: Vec<Dense<T>>,
}

fn he_uniform<T: Real>(shape: (usize, usize), fan_in: usize, rng: &mut Rng) -> Array2<T> {
    let limit = (6.0 / fan_in as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || cast(rng.random_range(-limit..limit)))
}

impl<T: Real> Network<T> {
    /// He-uniform weights (`±√(6/fan_in)`), zero biases.
    pub fn init(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let dense_layer = |n_in: usize, n_out: usize, rng: &mut Rng| Dense {
            w: he_uniform((n_out, n_in), n_in, rng),
            b: Array1::zeros(n_out),
        };
        Ok(match spec {
            ModelSpec::Cnn(s) => {
                let conv = Conv2d {
                    h1: s.h1,
                    w1: s.w1,
                    k: s.k,
                    kernels: he_uniform((s.n_k, s.k * s.k), s.k * s.k, rng),
                    bias: Array1::zeros(s.n_k),
                };
                let fc = dense_layer(s.flat_dim(), s.n_d, rng);
                let out = dense_layer(s.n_d, 2, rng);
                Network { spec, conv: Some(conv), dense: vec![fc, out] }
            }
            ModelSpec::Mlp(s) => {
                let l1 = dense_layer(s.input_dim(), s.l, rng);
                let l2 = dense_layer(s.l, s.m, rng);
                let out = dense_layer(s.m, 2, rng);
                Network { spec, conv: None, dense: vec![l1, l2, out] }
            }
        })
    }

    pub fn input_dim(&self) -> usize {
        let (h1, w1) = self.spec.input_dims();
        h1 * w1
    }

    /// Width of the layer dropout acts on.
    pub fn hidden_dim(&self) -> usize {
        self.dense.last().map_or(0, |d| d.w.ncols())
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| T::zero())
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Network<U> {
        Network {
            spec: self.spec,
            conv: self.conv.as_ref().map(|c| Conv2d {
                h1: c.h1,
                w1: c.w1,
                k: c.k,
                kernels: c.kernels.mapv(&f),
                bias: c.bias.mapv(&f),
            }),
            dense: self.dense.iter().map(|d| Dense { w: d.w.mapv(&f), b: d.b.mapv(&f) }).collect(),
        }
    }

    /// Parameter tensors in declared order: conv kernels, conv bias, then
    /// weight and bias of each dense layer.
    pub fn tensors(&self) -> Vec<(Vec<usize>, &[T])> {
        let mut out: Vec<(Vec<usize>, &[T])> = Vec::new();
        if let Some(c) = &self.conv {
            out.push((c.kernels.shape().to_vec(), c.kernels.as_slice().expect("contiguous")));
            out.push((c.bias.shape().to_vec(), c.bias.as_slice().expect("contiguous")));
        }
        for d in &self.dense {
            out.push((d.w.shape().to_vec(), d.w.as_slice().expect("contiguous")));
            out.push((d.b.shape().to_vec(), d.b.as_slice().expect("contiguous")));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        if let Some(c) = &mut self.conv {
            out.push(c.kernels.as_slice_mut().expect("contiguous"));
            out.push(c.bias.as_slice_mut().expect("contiguous"));
        }
        for d in &mut self.dense {
            out.push(d.w.as_slice_mut().expect("contiguous"));
            out.push(d.b.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn check_input(&self, x: ArrayView2<'_, T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(format!("{} inputs", self.input_dim()), format!("{} inputs", x.ncols())));
        }
        Ok(())
    }

    fn check_mask(&self, batch: usize, mask: Option<&Array2<T>>) -> Result<()> {
        match mask {
            Some(m) if m.dim() != (batch, self.hidden_dim()) => Err(Error::shape(
                format!("dropout mask {batch}x{}", self.hidden_dim()),
                format!("{}x{}", m.nrows(), m.ncols()),
            )),
            _ => Ok(()),
        }
    }

    /// Logits for a batch. `mask` is an inverted-dropout mask over the
    /// hidden layer feeding the output; `None` is eval mode.
    pub fn logits(&self, x: ArrayView2<'_, T>, mask: Option<&Array2<T>>) -> Result<Array2<T>> {
        self.check_input(x)?;
        self.check_mask(x.nrows(), mask)?;
        let mut a = match &self.conv {
            Some(c) => {
                let mut z = c.forward_cols(&c.im2col(x), x.nrows());
                relu_inplace(&mut z);
                z
            }
            None => x.to_owned(),
        };
        let (last, hidden) = self.dense.split_last().expect("output layer");
        for d in hidden {
            a = d.forward(a.view());
            relu_inplace(&mut a);
        }
        if let Some(m) = mask {
            a *= m;
        }
        Ok(last.forward(a.view()))
    }

    /// Mean cross-entropy loss, parameter gradients and probabilities.
    pub fn loss_grad(&self, x: ArrayView2<'_, T>, one_hot: ArrayView2<'_, T>, mask: Option<&Array2<T>>) -> Result<(T, Network<T>, Array2<T>)> {
        self.check_input(x)?;
        self.check_mask(x.nrows(), mask)?;
        if one_hot.dim() != (x.nrows(), 2) {
            return Err(Error::shape(format!("{}x2 targets", x.nrows()), format!("{}x{}", one_hot.nrows(), one_hot.ncols())));
        }
        let batch = x.nrows();
        let cols = self.conv.as_ref().map(|c| c.im2col(x));
        let a0 = match (&self.conv, &cols) {
            (Some(c), Some(cols)) => {
                let mut z = c.forward_cols(cols, batch);
                relu_inplace(&mut z);
                Some(z)
            }
            _ => None,
        };
        // inputs[i] feeds dense[i]; outs[i] is the ReLU output of hidden dense[i]
        let n = self.dense.len();
        let mut inputs: Vec<Array2<T>> = Vec::with_capacity(n);
        let mut outs: Vec<Array2<T>> = Vec::with_capacity(n - 1);
        let mut cur = a0.clone().unwrap_or_else(|| x.to_owned());
        for d in &self.dense[..n - 1] {
            let mut z = d.forward(cur.view());
            relu_inplace(&mut z);
            inputs.push(cur);
            outs.push(z.clone());
            cur = z;
        }
        if let Some(m) = mask {
            cur *= m;
        }
        inputs.push(cur);
        let logits = self.dense[n - 1].forward(inputs[n - 1].view());
        let (probs, loss, mut delta) = softmax_xent(logits.view(), one_hot);

        let mut grads = self.zeros_like();
        for i in (0..n).rev() {
            let need_dx = i > 0 || self.conv.is_some();
            let (dw, db, dx) = self.dense[i].backward(inputs[i].view(), &delta, need_dx);
            grads.dense[i] = Dense { w: dw, b: db };
            let Some(mut dx) = dx else { break };
            if i == n - 1 {
                if let Some(m) = mask {
                    dx *= m;
                }
            }
            let act = if i > 0 { &outs[i - 1] } else { a0.as_ref().expect("conv activation") };
            Zip::from(&mut dx).and(act).for_each(|g, &a| {
                if a <= T::zero() {
                    *g = T::zero();
                }
            });
            delta = dx;
        }
        if let (Some(c), Some(cols)) = (&self.conv, &cols) {
            let (dk, db) = c.backward(cols, delta);
            let gc = grads.conv.as_mut().expect("conv grads");
            gc.kernels = dk;
            gc.bias = db;
        }
        Ok((loss, grads, probs))
    }
}

/// Largest relative error between analytic and central-difference
/// parameter gradients, `|g − ĝ| / max(|g|, |ĝ|, floor)`.
pub fn max_gradient_error(net: &Network<f64>, x: ArrayView2<'_, f64>, one_hot: ArrayView2<'_, f64>, mask: Option<&Array2<f64>>, eps: f64, floor: f64) -> Result<f64> {
    let (_, grads, _) = net.loss_grad(x, one_hot, mask)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(|(_, t)| t.to_vec()).collect();
    let mut probe = net.clone();
    let loss_at = |p: &Network<f64>| -> Result<f64> {
        let logits = p.logits(x, mask)?;
        Ok(softmax_xent(logits.view(), one_hot).1)
    };
    let mut worst = 0.0f64;
    for (ti, g) in analytic.iter().enumerate() {
        for (j, &ga) in g.iter().enumerate() {
            let orig = probe.tensors_mut()[ti][j];
            probe.tensors_mut()[ti][j] = orig + eps;
            let up = loss_at(&probe)?;
            probe.tensors_mut()[ti][j] = orig - eps;
            let down = loss_at(&probe)?;
            probe.tensors_mut()[ti][j] = orig;
            let gn = (up - down) / (2.0 * eps);
            let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
