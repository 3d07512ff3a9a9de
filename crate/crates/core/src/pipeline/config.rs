use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::neuralnet::{CnnSpec, MlpSpec, ModelSpec, OptimizerConfig, OptimizerKind, TrainConfig, MAX_EPOCHS_LIMIT};
use crate::rng;
use crate::transforms::{TransformKind, DEFAULT_F_MAX, DEFAULT_F_MIN, DEFAULT_MU, DEFAULT_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cnn,
    Mlp,
    Nb,
    Rf,
    Svm,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Cnn => "cnn",
            Family::Mlp => "mlp",
            Family::Nb => "nb",
            Family::Rf => "rf",
            Family::Svm => "svm",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Family::Cnn | Family::Mlp)
    }
}

/// What a baseline classifies: one column of the configured time-frequency
/// image per frame, or the 304-dim hand-crafted feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineInput {
    Transform,
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    None,
    Rfe,
    Pca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub sample_rate: u32,
    pub h1: usize,
    pub w1: usize,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self { sample_rate: 8000, h1: 256, w1: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    pub kind: TransformKind,
    pub mu: f64,
    pub sigma: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self { kind: TransformKind::Cwt, mu: DEFAULT_MU, sigma: DEFAULT_SIGMA, f_min: DEFAULT_F_MIN, f_max: DEFAULT_F_MAX }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub input: BaselineInput,
    pub reduction: Reduction,
    /// RFE keeps `304 − 8·rfe_m` features.
    pub rfe_m: u32,
    /// PCA keeps `round(0.8^pca_n · 304)` components.
    pub pca_n: u32,
    pub rf_trees: usize,
    pub svm_c: f64,
    /// RBF width as a multiple of `1/d`.
    pub svm_gamma_scale: f64,
    /// Cap on SVM (and RFE ranking) training samples; a stratified seeded
    /// subsample is drawn above it.
    pub max_train: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            input: BaselineInput::Features,
            reduction: Reduction::Rfe,
            rfe_m: 27,
            pca_n: 1,
            rf_trees: crate::baselines::DEFAULT_TREES,
            svm_c: 1.0,
            svm_gamma_scale: 1.0,
            max_train: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub k: usize,
    pub n_k: usize,
    pub n_d: usize,
    pub l: usize,
    pub m: usize,
    pub dropout_p: f64,
    pub baseline: BaselineConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { family: Family::Cnn, k: 5, n_k: 32, n_d: 128, l: 256, m: 1024, dropout_p: 0.5, baseline: BaselineConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub val_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            optimizer: t.optimizer.name,
            learning_rate: t.optimizer.learning_rate,
            early_stop_patience: t.early_stop_patience,
            val_fraction: t.val_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub threshold: f64,
    pub median_kernel_s: f64,
    pub top_frac: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { threshold: 0.5, median_kernel_s: 1.0, top_frac: crate::eval::DEFAULT_TOP_FRAC }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { n_train: 37, n_test: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalConfig {
    pub folds: usize,
    /// Restrict the grid to these points (e.g. `"k=5,n_k=32,n_d=128"`);
    /// empty means the full grid.
    pub points: Vec<String>,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        Self { folds: crate::eval::DEFAULT_FOLDS, points: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/corpus`.
    pub corpus_dir: Option<PathBuf>,
    /// Defaults to `<corpus_dir>/labels.csv`.
    pub labels: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("out"), corpus_dir: None, labels: None }
    }
}

/// Every setting of a run. `synth.seed` is ignored; the corpus seed is the
/// root `seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub signal: SignalConfig,
    pub transform: TransformConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
    pub split: SplitConfig,
    pub crossval: CrossvalConfig,
    pub synth: SynthConfig,
    pub paths: PathsConfig,
}

fn cfg_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parse the right-hand side of `key=value` as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply a dotted `section.key=value` override to a TOML table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| cfg_err(format!("override `{assignment}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(cfg_err(format!("bad override key `{key}`")));
    }
    let (last, sections) = parts.split_last().expect("non-empty key");
    let mut cur = table;
    for s in sections {
        let entry = cur.entry(s.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| cfg_err(format!("override `{key}`: `{s}` is not a section")))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(text.parse::<toml::Table>().map_err(cfg_err)?)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: PipelineConfig = toml::Value::Table(table).try_into().map_err(cfg_err)?;
        Ok(cfg)
    }

    /// Read `path` (if any), then apply `key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| cfg_err(format!("cannot read config {}: {e}", p.display())))?
                .parse::<toml::Table>()
                .map_err(|e| cfg_err(format!("{}: {e}", p.display())))?,
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(cfg_err)
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn sha256(&self) -> Result<String> {
        Ok(hex(&Sha256::digest(self.to_toml_string()?.as_bytes())))
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.paths.corpus_dir.clone().unwrap_or_else(|| self.paths.out_dir.join("corpus"))
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig { seed: self.seed, ..self.synth.clone() }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let (h1, w1, m) = (self.signal.h1, self.signal.w1, &self.model);
        let spec = match m.family {
            Family::Cnn => ModelSpec::Cnn(CnnSpec { h1, w1, k: m.k, n_k: m.n_k, n_d: m.n_d, dropout_p: m.dropout_p }),
            Family::Mlp => ModelSpec::Mlp(MlpSpec { h1, w1, l: m.l, m: m.m, dropout_p: m.dropout_p }),
            other => return Err(cfg_err(format!("{} is not a neural family", other.as_str()))),
        };
        spec.validate().map_err(cfg_err)?;
        Ok(spec)
    }

    pub fn train_config(&self, stream: &str, index: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            optimizer: OptimizerConfig { name: t.optimizer, learning_rate: t.learning_rate },
            early_stop_patience: t.early_stop_patience,
            val_fraction: t.val_fraction,
            seed: rng::derive_seed(self.seed, stream, index),
        }
    }

    /// `<family>_<input>`, e.g. `cnn_cwt`, `nb_stft`, `nb_rfe88`.
    pub fn model_name(&self) -> String {
        let family = self.model.family;
        let input = if family.is_neural() || self.model.baseline.input == BaselineInput::Transform {
            self.transform.kind.as_str().to_string()
        } else {
            let b = &self.model.baseline;
            match b.reduction {
                Reduction::None => format!("f{}", crate::features::FEATURE_DIM),
                Reduction::Rfe => format!("rfe{}", crate::features::rfe_dim(b.rfe_m, crate::features::FEATURE_DIM)),
                Reduction::Pca => format!("pca{}", crate::features::pca_dim(b.pca_n, crate::features::FEATURE_DIM)),
            }
        };
        format!("{}_{input}", family.as_str())
    }

    /// Range checks; every failure is a configuration error.
    pub fn validate(&self) -> Result<()> {
        let s = &self.signal;
        if s.sample_rate == 0 || s.h1 == 0 || s.w1 == 0 {
            return Err(cfg_err("signal: sample_rate, h1 and w1 must be positive"));
        }
        let t = &self.transform;
        if !(t.mu > 0.0 && t.sigma > 0.0 && t.f_min > 0.0 && t.f_min < t.f_max) {
            return Err(cfg_err("transform: need mu > 0, sigma > 0 and 0 < f_min < f_max"));
        }
        if t.f_max > f64::from(s.sample_rate) / 2.0 {
            return Err(cfg_err(format!("transform: f_max {} exceeds Nyquist", t.f_max)));
        }
        if self.model.family.is_neural() {
            self.model_spec()?;
            self.train_config("train", 0).validate()?;
        } else {
            let b = &self.model.baseline;
            if b.input == BaselineInput::Features && s.h1 != crate::features::FEATURE_H1 {
                return Err(cfg_err(format!("features input needs h1 = {}", crate::features::FEATURE_H1)));
            }
            if !crate::features::RFE_GRID.contains(&b.rfe_m) || !crate::features::PCA_GRID.contains(&b.pca_n) {
                return Err(cfg_err("baseline: rfe_m must be in 0..=35 and pca_n in 0..=12"));
            }
            if b.rf_trees == 0 || b.max_train < 2 || !(b.svm_c > 0.0) || !(b.svm_gamma_scale > 0.0) {
                return Err(cfg_err("baseline: need rf_trees ≥ 1, max_train ≥ 2, svm_c > 0, svm_gamma_scale > 0"));
            }
        }
        if self.train.max_epochs > MAX_EPOCHS_LIMIT {
            return Err(cfg_err(format!("train.max_epochs is capped at {MAX_EPOCHS_LIMIT}")));
        }
        let e = &self.eval;
        if !(0.0..=1.0).contains(&e.threshold) || !(e.median_kernel_s >= 0.0) || !(e.top_frac > 0.0 && e.top_frac <= 1.0) {
            return Err(cfg_err("eval: need threshold in [0,1], median_kernel_s ≥ 0, top_frac in (0,1]"));
        }
        if self.split.n_train == 0 || self.split.n_test == 0 {
            return Err(cfg_err("split: n_train and n_test must be positive"));
        }
        if self.crossval.folds < 2 {
            return Err(cfg_err("crossval: folds must be at least 2"));
        }
        self.synth.validate(s.sample_rate)?;
        Ok(())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
