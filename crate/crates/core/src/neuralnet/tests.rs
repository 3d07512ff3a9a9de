use ndarray::{array, Array2, Array3, Axis};
use rand::Rng as _;

use super::*;
use crate::rng;
use crate::transforms::{PatchDataset, PatchMeta};

fn random_matrix(rows: usize, cols: usize, r: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(-1.0..1.0))
}

#[test]
fn conv_delta_and_symmetric_kernels() {
    let x = array![[1.0, 2.0], [3.0, 4.0]];
    let delta = array![[[1.0, 0.0], [0.0, 0.0]]];
    let y = conv2d_forward(x.view(), delta.view(), array![0.0].view()).unwrap();
    assert_eq!(y, Array3::from_elem((1, 1, 1), 1.0));
    let diag = array![[[1.0, 0.0], [0.0, 1.0]]];
    let y = conv2d_forward(x.view(), diag.view(), array![0.0].view()).unwrap();
    assert_eq!(y[[0, 0, 0]], 5.0);
}

#[test]
fn conv_rejects_oversized_kernel() {
    let x = Array2::<f64>::zeros((2, 2));
    let k = Array3::<f64>::zeros((1, 3, 3));
    assert!(conv2d_forward(x.view(), k.view(), array![0.0].view()).is_err());
}

#[test]
fn valid_shape_law_over_grid() {
    let x = Array2::<f64>::zeros((256, 10));
    let k = Array3::<f64>::zeros((3, 5, 5));
    assert_eq!(conv2d_forward(x.view(), k.view(), Array1::zeros(3).view()).unwrap().dim(), (252, 6, 3));
    for k in [2, 3, 4, 5] {
        for n_k in [1, 32, 64] {
            for n_d in [32, 64, 128, 256] {
                let s = CnnSpec { h1: 256, w1: 10, k, n_k, n_d, dropout_p: 0.5 };
                s.validate().unwrap();
                assert_eq!(s.out_dims(), (257 - k, 11 - k));
                assert_eq!(s.flat_dim(), (257 - k) * (11 - k) * n_k);
            }
        }
    }
}

#[test]
fn batched_conv_matches_reference() {
    let mut r = rng::seeded(1);
    let (h1, w1, k, n_k) = (7, 5, 3, 4);
    let x = random_matrix(3, h1 * w1, &mut r);
    let conv = Conv2d { h1, w1, k, kernels: random_matrix(n_k, k * k, &mut r), bias: array![0.1, -0.2, 0.3, 0.0] };
    let out = conv.forward_cols(&conv.im2col(x.view()), 3);
    let kernels = conv.kernels.clone().into_shape_with_order((n_k, k, k)).unwrap();
    let (h2, w2) = conv.out_dims();
    for b in 0..3 {
        let xi = x.row(b).to_owned().into_shape_with_order((h1, w1)).unwrap();
        let reference = conv2d_forward(xi.view(), kernels.view(), conv.bias.view()).unwrap();
        for ((i, j, p), v) in reference.indexed_iter() {
            assert!((out[[b, (i * w2 + j) * n_k + p]] - v).abs() < 1e-12);
        }
        assert_eq!(reference.dim(), (h2, w2, n_k));
    }
}

#[test]
fn conv_is_linear_in_input() {
    let mut r = rng::seeded(2);
    let x1 = random_matrix(6, 5, &mut r);
    let x2 = random_matrix(6, 5, &mut r);
    let k = random_matrix(2, 9, &mut r).into_shape_with_order((2, 3, 3)).unwrap();
    let zero = Array1::zeros(2);
    let f = |x: &Array2<f64>| conv2d_forward(x.view(), k.view(), zero.view()).unwrap();
    let (a, b) = (1.7, -0.4);
    let lhs = f(&(&x1 * a + &x2 * b));
    let rhs = f(&x1) * a + f(&x2) * b;
    assert!(lhs.iter().zip(&rhs).all(|(l, r)| (l - r).abs() < 1e-9));
}

#[test]
fn dense_examples() {
    let eye = array![[1.0, 0.0], [0.0, 1.0]];
    let y = dense_forward(array![1.0, -2.0].view(), eye.view(), array![0.0, 0.0].view(), Activation::Relu).unwrap();
    assert_eq!(y, array![1.0, 0.0]);
    let zero = Array2::<f64>::zeros((2, 3));
    let y = dense_forward(array![5.0, -1.0, 2.0].view(), zero.view(), array![-1.0, 2.5].view(), Activation::Relu).unwrap();
    assert_eq!(y, array![0.0, 2.5]);
    let w = array![[1.0, 2.0], [3.0, 4.0]];
    let y = dense_forward(array![1.0, 1.0].view(), w.view(), array![0.0, 0.0].view(), Activation::Identity).unwrap();
    assert_eq!(y, array![3.0, 7.0]);
    assert!(dense_forward(array![1.0].view(), w.view(), array![0.0, 0.0].view(), Activation::Identity).is_err());
}

#[test]
fn softmax_examples() {
    let (p, loss, g) = softmax_xent(array![[0.0, 0.0]].view(), array![[0.0, 1.0]].view());
    assert_eq!(p, array![[0.5, 0.5]]);
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(g, array![[0.5, -0.5]]);
    let (p, loss, _) = softmax_xent(array![[1000.0, 0.0]].view(), array![[1.0, 0.0]].view());
    assert_eq!(p[[0, 0]], 1.0);
    assert!(p[[0, 1]] >= 0.0 && p[[0, 1]] < 1e-300);
    assert!(loss.is_finite() && loss.abs() < 1e-12);
    // saturated wrong class: loss is the logit gap, not infinity
    let (_, loss, _) = softmax_xent(array![[1000.0, 0.0]].view(), array![[0.0, 1.0]].view());
    assert!((loss - 1000.0).abs() < 1e-9);
}

#[test]
fn dropout_identities() {
    let mut r = rng::seeded(3);
    let x = random_matrix(4, 7, &mut r);
    assert_eq!(dropout_apply(x.view(), 0.5, Mode::Eval, &mut r), x);
    assert_eq!(dropout_apply(x.view(), 0.0, Mode::Train, &mut r), x);
    assert_eq!(dropout_apply(x.view(), 0.0, Mode::Eval, &mut r), x);
}

#[test]
fn dropout_statistics() {
    let mut r = rng::seeded(4);
    let x = Array2::<f64>::ones((1000, 1000));
    let y = dropout_apply(x.view(), 0.5, Mode::Train, &mut r);
    let survivors = y.iter().filter(|&&v| v != 0.0).count() as f64 / 1e6;
    assert!((survivors - 0.5).abs() <= 0.002, "{survivors}");
    assert!((y.mean().unwrap() - 1.0).abs() <= 0.005);
    assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
}

fn cnn_instance(seed: u64) -> (Network<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    let mut r = rng::seeded(seed);
    let spec = ModelSpec::Cnn(CnnSpec { h1: 8, w1: 6, k: 3, n_k: 2, n_d: 4, dropout_p: 0.5 });
    let mut net = Network::<f64>::init(spec, &mut r).unwrap();
    // nonzero biases exercise the bias paths
    for t in net.tensors_mut() {
        if t.len() <= 4 {
            t.iter_mut().for_each(|v| *v = r.random_range(-0.1..0.1));
        }
    }
    let batch = 5;
    let x = random_matrix(batch, 48, &mut r);
    let y = Array2::from_shape_fn((batch, 2), |(i, c)| f64::from(u8::from((i % 2) == c)));
    let mask = dropout_mask::<f64>((batch, 4), 0.5, &mut r);
    (net, x, y, mask)
}

#[test]
fn cnn_gradients_match_finite_differences() {
    for seed in 0..5 {
        let (net, x, y, mask) = cnn_instance(seed);
        let err = max_gradient_error(&net, x.view(), y.view(), Some(&mask), 1e-4, 1e-6).unwrap();
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut r = rng::seeded(9);
    let spec = ModelSpec::Mlp(MlpSpec { h1: 4, w1: 3, l: 6, m: 5, dropout_p: 0.5 });
    let net = Network::<f64>::init(spec, &mut r).unwrap();
    let x = random_matrix(7, 12, &mut r);
    let y = Array2::from_shape_fn((7, 2), |(i, c)| f64::from(u8::from((i % 3 == 0) == (c == 1))));
    let mask = dropout_mask::<f64>((7, 5), 0.5, &mut r);
    let err = max_gradient_error(&net, x.view(), y.view(), Some(&mask), 1e-4, 1e-6).unwrap();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn small_sgd_step_descends() {
    let (mut net, x, y, _) = cnn_instance(11);
    let (l0, g, _) = net.loss_grad(x.view(), y.view(), None).unwrap();
    let mut opt = Optimizer::new(OptimizerConfig { name: OptimizerKind::Sgd, learning_rate: 1e-5 }, &net);
    opt.step(&mut net, &g);
    let (l1, _, _) = net.loss_grad(x.view(), y.view(), None).unwrap();
    assert!(l1 < l0, "{l1} >= {l0}");
}

fn toy_dataset(n: usize, seed: u64) -> PatchDataset {
    let mut r = rng::seeded(seed);
    let mut d = PatchDataset::empty(2, 1);
    for i in 0..n {
        let label = (i % 2) as u8;
        let sign = if label == 1 { 1.0 } else { -1.0 };
        let a: f64 = r.random_range(-1.0..1.0);
        let b: f64 = sign * r.random_range(0.3..1.0);
        d.patches.extend([(a + b) as f32, (b - a) as f32]);
        d.labels.push(label);
        d.meta.push(PatchMeta { recording_id: "toy".into(), start_frame: i });
    }
    d
}

fn toy_spec() -> ModelSpec {
    ModelSpec::Mlp(MlpSpec { h1: 2, w1: 1, l: 16, m: 16, dropout_p: 0.5 })
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        optimizer: OptimizerConfig { name: OptimizerKind::Adam, learning_rate: 1e-2 },
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn learns_separable_toy_set() {
    let data = toy_dataset(400, 1);
    let model = train(&toy_spec(), &data, &toy_config()).unwrap();
    assert!(model.history.len() <= 20);
    let all: Vec<usize> = (0..data.len()).collect();
    let (_, acc) = evaluate(&model.network, &data, &all).unwrap();
    assert!(acc >= 0.99, "train accuracy {acc}");

    let held_out = toy_dataset(200, 2);
    let probs = predict_dataset(&model, &held_out).unwrap();
    for (row, &l) in probs.rows().into_iter().zip(&held_out.labels) {
        assert!((row.sum() - 1.0).abs() < 1e-9);
        if l == 1 {
            assert!(row[1] > 0.9, "p1 = {}", row[1]);
        }
    }
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let data = toy_dataset(100, 3);
    let mut cfg = toy_config();
    cfg.optimizer.learning_rate = 0.0;
    let model = train(&toy_spec(), &data, &cfg).unwrap();
    let init = Network::<f32>::init(toy_spec(), &mut rng::derived(cfg.seed, "nn.init", 0)).unwrap();
    assert_eq!(model.network, init);
    let first = model.history[0];
    assert!(model.history.iter().all(|e| {
        (e.train_loss, e.train_acc, e.val_loss, e.val_acc)
            == (first.train_loss, first.train_acc, first.val_loss, first.val_acc)
    }));
    // no improvement after epoch 1, so patience stops the run
    assert_eq!(model.history.len(), 1 + cfg.early_stop_patience);
    assert_eq!(model.best_epoch, 1);
}

#[test]
fn training_is_deterministic() {
    let data = toy_dataset(120, 4);
    let a = train(&toy_spec(), &data, &toy_config()).unwrap();
    let b = train(&toy_spec(), &data, &toy_config()).unwrap();
    assert_eq!(a, b);
    let mut other = toy_config();
    other.seed = 6;
    assert_ne!(a.network, train(&toy_spec(), &data, &other).unwrap().network);
}

#[test]
fn predict_is_pure_and_normalized() {
    let data = toy_dataset(60, 5);
    let model = train(&toy_spec(), &data, &toy_config()).unwrap();
    let x = array![[0.3f32, -0.2], [0.3, -0.2], [100.0, 50.0], [-1e4, 3.0]];
    let p = predict(&model, x.view()).unwrap();
    assert_eq!(p.row(0), p.row(1));
    assert_eq!(p, predict(&model, x.view()).unwrap());
    for s in p.sum_axis(Axis(1)) {
        assert!((s - 1.0).abs() < 1e-9);
    }
    assert!(predict(&model, Array2::<f32>::zeros((2, 3)).view()).is_err());
}

#[test]
fn train_rejects_bad_inputs() {
    let mut data = toy_dataset(20, 6);
    assert!(train(&ModelSpec::Mlp(MlpSpec { h1: 3, w1: 1, l: 2, m: 2, dropout_p: 0.0 }), &data, &toy_config()).is_err());
    data.labels.iter_mut().for_each(|l| *l = 0);
    assert!(train(&toy_spec(), &data, &toy_config()).is_err());
    let data = toy_dataset(20, 6);
    let bad = TrainConfig { val_fraction: 1.0, ..toy_config() };
    assert!(matches!(train(&toy_spec(), &data, &bad), Err(crate::Error::Config(_))));
    let bad = TrainConfig { batch_size: 0, ..toy_config() };
    assert!(train(&toy_spec(), &data, &bad).is_err());
}

#[test]
fn stratified_split_keeps_class_ratio() {
    let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 30)).collect();
    let (tr, va) = stratified_split(&labels, 0.1, &mut rng::seeded(0));
    assert_eq!(va.len(), 10);
    assert_eq!(va.iter().filter(|&&i| labels[i] == 1).count(), 3);
    assert_eq!(tr.len() + va.len(), 100);
    let (_, va) = stratified_split(&[0, 1], 0.5, &mut rng::seeded(0));
    assert!(va.is_empty());
}

#[test]
fn model_file_round_trip() {
    let data = toy_dataset(60, 7);
    let model = train(&toy_spec(), &data, &toy_config()).unwrap();
    let mut buf = Vec::new();
    write_model(&mut buf, &model).unwrap();
    assert_eq!(&buf[..4], b"AEDN");
    let back = read_model(buf.as_slice()).unwrap();
    assert_eq!(back, model);

    let mut rng = rng::seeded(0);
    let cnn = ModelSpec::Cnn(CnnSpec { h1: 8, w1: 6, k: 3, n_k: 2, n_d: 4, dropout_p: 0.5 });
    let net = Network::<f32>::init(cnn, &mut rng).unwrap();
    let m = TrainedModel { spec: cnn, network: net, history: vec![], seed: 42, best_epoch: 0 };
    let mut buf = Vec::new();
    write_model(&mut buf, &m).unwrap();
    assert_eq!(read_model(buf.as_slice()).unwrap(), m);

    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(read_model(bad.as_slice()), Err(crate::Error::Format(_))));
    assert!(read_model(&buf[..buf.len() - 1]).is_err());
    let mut long = buf.clone();
    long.push(0);
    assert!(read_model(long.as_slice()).is_err());
}

#[test]
fn parameter_counts_agree() {
    let mut r = rng::seeded(0);
    for spec in [
        ModelSpec::Cnn(CnnSpec { h1: 16, w1: 10, k: 3, n_k: 4, n_d: 8, dropout_p: 0.5 }),
        ModelSpec::Mlp(MlpSpec { h1: 16, w1: 10, l: 8, m: 6, dropout_p: 0.5 }),
    ] {
        assert_eq!(Network::<f32>::init(spec, &mut r).unwrap().n_params(), spec.n_params());
    }
}
