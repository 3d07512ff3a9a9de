use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::{cast, dropout_mask, softmax_xent, ModelSpec, Real};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::transforms::PatchDataset;

pub const MAX_EPOCHS_LIMIT: usize = 20;
const PREDICT_BATCH: usize = 256;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub name: OptimizerKind,
    pub learning_rate: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { name: OptimizerKind::Adam, learning_rate: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub optimizer: OptimizerConfig,
    pub early_stop_patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            max_epochs: MAX_EPOCHS_LIMIT,
            optimizer: OptimizerConfig::default(),
            early_stop_patience: 5,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(1..=MAX_EPOCHS_LIMIT).contains(&self.max_epochs) {
            return bad(format!("max_epochs must be in 1..={MAX_EPOCHS_LIMIT}, got {}", self.max_epochs));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must be in (0, 1), got {}", self.val_fraction));
        }
        if !(self.optimizer.learning_rate >= 0.0 && self.optimizer.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be finite and non-negative, got {}", self.optimizer.learning_rate));
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience must be at least 1".into());
        }
        Ok(())
    }
}

/// Adam or plain SGD over all parameter tensors.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    cfg: OptimizerConfig,
    m: Network<T>,
    v: Network<T>,
    t: i32,
}

impl<T: Real> Optimizer<T> {
    pub fn new(cfg: OptimizerConfig, net: &Network<T>) -> Self {
        Self { cfg, m: net.zeros_like(), v: net.zeros_like(), t: 0 }
    }

    pub fn step(&mut self, net: &mut Network<T>, grads: &Network<T>) {
        let lr: T = cast(self.cfg.learning_rate);
        let g = grads.tensors();
        match self.cfg.name {
            OptimizerKind::Sgd => {
                for (p, (_, g)) in net.tensors_mut().into_iter().zip(g) {
                    for (p, &g) in p.iter_mut().zip(g) {
                        *p = *p - lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let (b1, b2, eps): (T, T, T) = (cast(ADAM_BETA1), cast(ADAM_BETA2), cast(ADAM_EPS));
                let c1 = T::one() - b1.powi(self.t);
                let c2 = T::one() - b2.powi(self.t);
                let params = net.tensors_mut();
                let ms = self.m.tensors_mut();
                let vs = self.v.tensors_mut();
                for (((p, (_, g)), m), v) in params.into_iter().zip(g).zip(ms).zip(vs) {
                    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let step = (*m / c1) / ((*v / c2).sqrt() + eps);
                        *p = *p - lr * step;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub network: Network<f32>,
    pub history: Vec<EpochStats>,
    pub seed: u64,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainedModel {
    pub fn n_params(&self) -> usize {
        self.network.n_params()
    }
}

/// Per-class shuffled hold-out of `round(frac · n_c)` indices, always
/// leaving at least one sample of each class for training.
pub fn stratified_split(labels: &[u8], frac: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let n_val = ((frac * idx.len() as f64).round() as usize).min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn gather(data: &PatchDataset, idx: &[usize]) -> (Array2<f32>, Array2<f32>) {
    let d = data.patch_len();
    let mut x = Vec::with_capacity(idx.len() * d);
    let mut y = Vec::with_capacity(idx.len() * 2);
    for &i in idx {
        x.extend_from_slice(data.patch(i));
        y.extend_from_slice(&data.one_hot(i));
    }
    (
        Array2::from_shape_vec((idx.len(), d), x).expect("batch shape"),
        Array2::from_shape_vec((idx.len(), 2), y).expect("target shape"),
    )
}

fn probabilities(net: &Network<f32>, x: ArrayView2<'_, f32>) -> Result<Array2<f64>> {
    let logits = net.logits(x, None)?.mapv(f64::from);
    let dummy = Array2::<f64>::zeros(logits.dim());
    Ok(softmax_xent(logits.view(), dummy.view()).0)
}

/// Eval-mode mean loss and accuracy over `idx`; class 1 is predicted when
/// `p1 ≥ 0.5`.
pub fn evaluate(net: &Network<f32>, data: &PatchDataset, idx: &[usize]) -> Result<(f64, f64)> {
    if idx.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let (mut loss, mut correct) = (0.0, 0usize);
    for chunk in idx.chunks(PREDICT_BATCH) {
        let (x, y) = gather(data, chunk);
        let logits = net.logits(x.view(), None)?.mapv(f64::from);
        let (p, l, _) = softmax_xent(logits.view(), y.mapv(f64::from).view());
        loss += l * chunk.len() as f64;
        correct += chunk
            .iter()
            .zip(p.rows())
            .filter(|(&i, row)| u8::from(row[1] >= 0.5) == data.labels[i])
            .count();
    }
    Ok((loss / idx.len() as f64, correct as f64 / idx.len() as f64))
}

/// Mini-batch training with a stratified validation hold-out and early
/// stopping on validation accuracy (ties broken by validation loss). Returns the best-validation parameters.
pub fn train(spec: &ModelSpec, data: &PatchDataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    spec.validate()?;
    if (data.h1, data.w1) != spec.input_dims() {
        let (h1, w1) = spec.input_dims();
        return Err(Error::shape(format!("{h1}x{w1} patches"), format!("{}x{} patches", data.h1, data.w1)));
    }
    let counts = data.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::invalid(format!("training data needs both classes, got counts {counts:?}")));
    }
    let seed = cfg.seed;
    let (train_idx, mut val_idx) = stratified_split(&data.labels, cfg.val_fraction, &mut rng::derived(seed, "nn.split", 0));
    if val_idx.is_empty() {
        val_idx = train_idx.clone();
    }
    let mut net = Network::<f32>::init(*spec, &mut rng::derived(seed, "nn.init", 0))?;
    let mut opt = Optimizer::new(cfg.optimizer, &net);
    let mut drop_rng = rng::derived(seed, "nn.dropout", 0);
    let p = spec.dropout_p();

    let mut history = Vec::new();
    // (val_acc, val_loss); equal accuracy with lower loss counts as progress
    let mut best_score = (f64::NEG_INFINITY, f64::INFINITY);
    let mut best = (net.clone(), 0usize);
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut rng::derived(seed, "nn.shuffle", epoch as u64));
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = gather(data, chunk);
            let mask = (p > 0.0).then(|| dropout_mask::<f32>((chunk.len(), net.hidden_dim()), p, &mut drop_rng));
            let (_, grads, _) = net.loss_grad(x.view(), y.view(), mask.as_ref())?;
            opt.step(&mut net, &grads);
        }
        let (train_loss, train_acc) = evaluate(&net, data, &train_idx)?;
        let (val_loss, val_acc) = evaluate(&net, data, &val_idx)?;
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!("training loss diverged at epoch {epoch}")));
        }
        history.push(EpochStats { epoch, train_loss, train_acc, val_loss, val_acc });
        if val_acc > best_score.0 || (val_acc == best_score.0 && val_loss < best_score.1) {
            best_score = (val_acc, val_loss);
            best = (net.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
    }
    Ok(TrainedModel { spec: *spec, network: best.0, history, seed, best_epoch: best.1 })
}

/// Per-row `[p0, p1]` for flattened `h1·w1` patches, eval mode.
pub fn predict(model: &TrainedModel, patches: ArrayView2<'_, f32>) -> Result<Array2<f64>> {
    let d = model.network.input_dim();
    if patches.ncols() != d {
        return Err(Error::shape(format!("{d}-value patches"), format!("{}-value patches", patches.ncols())));
    }
    let mut out = Array2::zeros((patches.nrows(), 2));
    let mut start = 0;
    while start < patches.nrows() {
        let end = (start + PREDICT_BATCH).min(patches.nrows());
        let p = probabilities(&model.network, patches.slice(ndarray::s![start..end, ..]))?;
        out.slice_mut(ndarray::s![start..end, ..]).assign(&p);
        start = end;
    }
    Ok(out)
}

pub fn predict_dataset(model: &TrainedModel, data: &PatchDataset) -> Result<Array2<f64>> {
    if (data.h1, data.w1) != model.spec.input_dims() {
        let (h1, w1) = model.spec.input_dims();
        return Err(Error::shape(format!("{h1}x{w1} patches"), format!("{}x{} patches", data.h1, data.w1)));
    }
    let x = ArrayView2::from_shape((data.len(), data.patch_len()), &data.patches)
        .map_err(|e| Error::invalid(format!("patch buffer: {e}")))?;
    predict(model, x)
}
