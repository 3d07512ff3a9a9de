//! Python bindings: configuration, the pipeline commands, trained models,
//! transforms, features and metrics.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use aedet_core::corpus::{load_wav, resample, Recording};
use aedet_core::eval::{self, EvalReport};
use aedet_core::features::FeatureExtractor;
use aedet_core::pipeline::{self, LoadedModel, PipelineConfig, Split};
use aedet_core::transforms::{self, TimeFrequencyImage};

create_exception!(aedet, ConfigError, PyValueError, "Invalid configuration (CLI exit code 2).");
create_exception!(aedet, DataError, PyRuntimeError, "Missing or malformed data (CLI exit code 3).");

fn err(e: aedet_core::Error) -> PyErr {
    if e.is_config() {
        ConfigError::new_err(e.to_string())
    } else {
        DataError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for aedet_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

/// Pipeline configuration, built from TOML text plus `key=value` overrides.
#[pyclass(name = "Config", module = "aedet", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml=None, overrides=Vec::new()))]
    fn new(toml: Option<&str>, overrides: Vec<String>) -> PyResult<Self> {
        let mut table = match toml {
            Some(t) => t.parse::<::toml::Table>().map_err(|e| ConfigError::new_err(e.to_string()))?,
            None => ::toml::Table::new(),
        };
        for o in &overrides {
            pipeline::apply_override(&mut table, o).py()?;
        }
        Ok(Self { inner: PipelineConfig::from_table(table).py()? })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides=Vec::new()))]
    fn load(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self { inner: PipelineConfig::load(Some(&path), &overrides).py()? })
    }

    /// Return a copy with `key=value` overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        let mut table: ::toml::Table = self.inner.to_toml_string().py()?.parse().map_err(|e: ::toml::de::Error| ConfigError::new_err(e.to_string()))?;
        for o in &overrides {
            pipeline::apply_override(&mut table, o).py()?;
        }
        Ok(Self { inner: PipelineConfig::from_table(table).py()? })
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().py()
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().py()
    }

    fn sha256(&self) -> PyResult<String> {
        self.inner.sha256().py()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn model_name(&self) -> String {
        self.inner.model_name()
    }

    #[getter]
    fn out_dir(&self) -> PathBuf {
        self.inner.paths.out_dir.clone()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Config(model={}, seed={}, out_dir={:?})", self.inner.model_name(), self.inner.seed, self.inner.paths.out_dir)
    }
}

fn report_dict<'py>(py: Python<'py>, r: &EvalReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("f1", r.f1)?;
    d.set_item("tpr", r.tpr)?;
    d.set_item("tnr", r.tnr)?;
    d.set_item("tnr_defined", r.tnr_defined)?;
    d.set_item("roc_area", r.roc_area)?;
    d.set_item("pr_area", r.pr_area)?;
    d.set_item("roc_points", r.roc_points.clone())?;
    d.set_item("pr_points", r.pr_points.clone())?;
    d.set_item("n_pos", r.n_pos)?;
    d.set_item("n_neg", r.n_neg)?;
    Ok(d)
}

/// Generate the synthetic corpus; returns its directory.
#[pyfunction]
fn synth(py: Python<'_>, config: &PyConfig) -> PyResult<PathBuf> {
    let cfg = config.inner.clone();
    Ok(py.detach(move || pipeline::cmd_synth(&cfg)).py()?.dir)
}

/// Train the configured model; returns a summary dict.
#[pyfunction]
fn train<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let s = py.detach(move || pipeline::cmd_train(&cfg)).py()?;
    let d = PyDict::new(py);
    d.set_item("name", &s.name)?;
    d.set_item("model_path", &s.model_path)?;
    d.set_item("n_params", s.n_params)?;
    d.set_item("n_units", s.n_units)?;
    d.set_item("best_epoch", s.best_epoch)?;
    let hist: Vec<(usize, f64, f64, f64, f64)> =
        s.history.iter().map(|e| (e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc)).collect();
    d.set_item("history", hist)?;
    for (k, v) in &s.metrics {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Score a split; returns `{"raw": {...}, "filtered": {...}, "files": [...]}`.
#[pyfunction]
#[pyo3(signature = (config, model_path=None, split="test"))]
fn evaluate<'py>(py: Python<'py>, config: &PyConfig, model_path: Option<PathBuf>, split: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let split: Split = split.parse().py()?;
    let s = py.detach(move || pipeline::cmd_eval(&cfg, model_path.as_deref(), split)).py()?;
    let d = PyDict::new(py);
    d.set_item("name", &s.name)?;
    d.set_item("raw", report_dict(py, &s.report.raw)?)?;
    d.set_item("filtered", report_dict(py, &s.report.filtered)?)?;
    d.set_item("files", s.files)?;
    Ok(d)
}

/// Score WAV files; returns `{recording_id: (scores, filtered_scores)}`.
#[pyfunction]
#[pyo3(signature = (config, inputs, model_path=None))]
fn predict<'py>(py: Python<'py>, config: &PyConfig, inputs: Vec<PathBuf>, model_path: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let s = py.detach(move || pipeline::cmd_predict(&cfg, model_path.as_deref(), &inputs)).py()?;
    let d = PyDict::new(py);
    for (r, f) in s.scores.iter().zip(&s.filtered) {
        d.set_item(&r.id, (r.scores.clone(), f.scores.clone()))?;
    }
    Ok(d)
}

/// Grid search; returns `(best_point, {point: mean_pr_area})`.
#[pyfunction]
fn crossval(py: Python<'_>, config: &PyConfig) -> PyResult<(String, std::collections::BTreeMap<String, f64>)> {
    let cfg = config.inner.clone();
    let s = py.detach(move || pipeline::cmd_crossval(&cfg)).py()?;
    Ok((s.result.best_entry().point.to_string(), s.result.as_map()))
}

/// Class spectra; returns a dict of the frequency axis and four curves.
#[pyfunction]
#[pyo3(signature = (config, model_path=None))]
fn visualize<'py>(py: Python<'py>, config: &PyConfig, model_path: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let s = py.detach(move || pipeline::cmd_visualize(&cfg, model_path.as_deref())).py()?;
    let sp = &s.spectra;
    let d = PyDict::new(py);
    d.set_item("freq_hz", sp.freq_axis.clone())?;
    d.set_item("x0_test", sp.test[0].clone())?;
    d.set_item("x0_train", sp.train[0].clone())?;
    d.set_item("x1_test", sp.test[1].clone())?;
    d.set_item("x1_train", sp.train[1].clone())?;
    d.set_item("peak_hz", (sp.peak_hz(0), sp.peak_hz(1)))?;
    Ok(d)
}

/// A trained model loaded from `<name>.model` and its sidecars.
#[pyclass(name = "Model", module = "aedet")]
struct PyModel {
    inner: LoadedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: LoadedModel::load(&path).py()? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.meta.name.clone()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.meta.family.as_str()
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.meta.n_params
    }

    #[getter]
    fn selected_features(&self) -> Option<Vec<usize>> {
        self.inner.meta.selected_features.clone()
    }

    /// Per-unit event probabilities for raw samples (resampled if needed);
    /// returns `(scores, units_per_second)`.
    fn score(&self, samples: Vec<f64>, sample_rate: u32) -> PyResult<(Vec<f64>, f64)> {
        let rec = Recording::new("input", samples, sample_rate).py()?;
        let rec = resample(&rec, self.inner.meta.signal.sample_rate).py()?;
        let s = self.inner.scorer().py()?.score(&rec, None).py()?;
        Ok((s.scores, s.rate))
    }

    fn score_wav(&self, path: PathBuf) -> PyResult<(Vec<f64>, f64)> {
        let rec = load_wav(&path).py()?;
        self.score(rec.samples, rec.sample_rate)
    }

    fn __repr__(&self) -> String {
        format!("Model(name={}, params={})", self.inner.meta.name, self.inner.meta.n_params)
    }
}

type Image = (Vec<Vec<f64>>, Vec<f64>, f64);

fn image(img: TimeFrequencyImage) -> Image {
    (img.values.rows().into_iter().map(|r| r.to_vec()).collect(), img.freq_axis, img.frame_rate)
}

/// Log-magnitude STFT; returns `(rows, freq_axis, frame_rate)`.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=8000, h1=256))]
fn stft(samples: Vec<f64>, sample_rate: u32, h1: usize) -> PyResult<Image> {
    let rec = Recording::new("input", samples, sample_rate).py()?;
    Ok(image(transforms::stft_spectrogram(&rec, h1).py()?))
}

/// Bump-wavelet scalogram; returns `(rows, freq_axis, frame_rate)`.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=8000, h1=256, f_min=transforms::DEFAULT_F_MIN, f_max=transforms::DEFAULT_F_MAX, mu=transforms::DEFAULT_MU, sigma=transforms::DEFAULT_SIGMA))]
fn cwt(samples: Vec<f64>, sample_rate: u32, h1: usize, f_min: f64, f_max: f64, mu: f64, sigma: f64) -> PyResult<Image> {
    let rec = Recording::new("input", samples, sample_rate).py()?;
    let bank = transforms::scales_for_band(h1, f_min, f_max, mu, sigma, f64::from(sample_rate)).py()?;
    Ok(image(transforms::cwt_scalogram(&rec, &bank).py()?))
}

#[pyfunction]
#[pyo3(signature = (x, mu=transforms::DEFAULT_MU, sigma=transforms::DEFAULT_SIGMA))]
fn bump_wavelet(x: f64, mu: f64, sigma: f64) -> f64 {
    transforms::bump_wavelet_fourier(x, mu, sigma)
}

/// 304-dim hand-crafted feature vectors, one per frame.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=8000))]
fn extract_features(samples: Vec<f64>, sample_rate: u32) -> PyResult<Vec<Vec<f64>>> {
    let rec = Recording::new("input", samples, sample_rate).py()?;
    let fx = FeatureExtractor::new(sample_rate, aedet_core::features::FEATURE_H1).py()?;
    Ok(fx.extract_recording(&rec).py()?.into_iter().map(|f| f.values).collect())
}

#[pyfunction]
fn roc_area(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    eval::roc_area(&scores, &labels).py()
}

#[pyfunction]
fn pr_area(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    eval::pr_area(&scores, &labels).py()
}

#[pyfunction]
#[pyo3(signature = (scores, labels, threshold=eval::DEFAULT_THRESHOLD))]
fn evaluate_scores<'py>(py: Python<'py>, scores: Vec<f64>, labels: Vec<u8>, threshold: f64) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, &eval::evaluate_scores(&scores, &labels, threshold).py()?)
}

/// Sliding median with edge replication; `kernel_len` must be odd.
#[pyfunction]
fn median_filter(scores: Vec<f64>, kernel_len: usize) -> PyResult<Vec<f64>> {
    eval::median_filter(&scores, kernel_len).py()
}

#[pymodule]
fn aedet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("DataError", m.py().get_type::<DataError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(crossval, m)?)?;
    m.add_function(wrap_pyfunction!(visualize, m)?)?;
    m.add_function(wrap_pyfunction!(stft, m)?)?;
    m.add_function(wrap_pyfunction!(cwt, m)?)?;
    m.add_function(wrap_pyfunction!(bump_wavelet, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(roc_area, m)?)?;
    m.add_function(wrap_pyfunction!(pr_area, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_scores, m)?)?;
    m.add_function(wrap_pyfunction!(median_filter, m)?)?;
    Ok(())
}
