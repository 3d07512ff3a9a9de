//! Fitting, persisting and applying any model family.

use std::path::{Path, PathBuf};

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{BaselineConfig, BaselineInput, Family, PipelineConfig, Reduction, SignalConfig, TransformConfig};
use super::data::{labelled_image, labelled_images, patches, stack, stratified_subsample, RowSource, Transformer};
use super::prep::{load_prep, save_prep, FeaturePrep, Projection};
use crate::baselines::{load_baseline, nb_fit, rf_fit, save_baseline, svm_fit, BaselineModel};
use crate::corpus::{Corpus, LabelTrack, Recording};
use crate::error::{Error, Result};
use crate::eval::{evaluate_scores, median_filter_seconds, EvalReport};
use crate::features::{pca_dim, pca_fit, rfe_dim, rfe_select, RFE_STEP};
use crate::neuralnet::{load_model, predict_dataset, save_model, train, write_history_csv, EpochStats, TrainedModel};
use crate::rng;
use crate::transforms::Standardization;

/// Everything needed to rebuild a model's input pipeline, stored next to
/// the weights as `<name>.meta.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub name: String,
    pub family: Family,
    /// Always `transform` for neural models.
    pub input: BaselineInput,
    pub signal: SignalConfig,
    pub transform: TransformConfig,
    /// Global image statistics fitted on the training split (neural only).
    pub standardization: Option<Standardization>,
    /// Feature indices kept by RFE (feature baselines only).
    pub selected_features: Option<Vec<usize>>,
    pub n_inputs: usize,
    pub n_params: usize,
    pub config_sha256: String,
}

#[derive(Debug, Clone)]
pub enum Predictor {
    Neural(TrainedModel),
    Baseline { model: BaselineModel, prep: FeaturePrep },
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub meta: ModelMeta,
    pub predictor: Predictor,
}

/// Sidecar paths of `<dir>/<name>.model`.
#[derive(Debug, Clone)]
pub struct ModelPaths {
    pub model: PathBuf,
    pub meta: PathBuf,
    pub prep: PathBuf,
    pub history: PathBuf,
}

impl ModelPaths {
    pub fn of(model: &Path) -> Self {
        Self {
            model: model.to_path_buf(),
            meta: model.with_extension("meta.toml"),
            prep: model.with_extension("prep"),
            history: model.with_extension("history.csv"),
        }
    }
}

/// Frame-level scores of one recording at `rate` units per second.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingScores {
    pub id: String,
    pub rate: f64,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub raw: EvalReport,
    pub filtered: EvalReport,
}

/// Median-filter each recording's scores with a `kernel_s`-second window.
pub fn filter_scores(recs: &[RecordingScores], kernel_s: f64) -> Result<Vec<RecordingScores>> {
    recs.iter()
        .map(|r| {
            let scores = if r.scores.is_empty() { Vec::new() } else { median_filter_seconds(&r.scores, kernel_s, r.rate)? };
            Ok(RecordingScores { scores, ..r.clone() })
        })
        .collect()
}

fn flatten(recs: &[RecordingScores]) -> (Vec<f64>, Vec<u8>) {
    (recs.iter().flat_map(|r| r.scores.iter().copied()).collect(), recs.iter().flat_map(|r| r.labels.iter().copied()).collect())
}

/// Pooled metrics before and after per-recording median filtering.
pub fn report_scores(recs: &[RecordingScores], threshold: f64, kernel_s: f64) -> Result<ScoreReport> {
    let (s, l) = flatten(recs);
    let raw = evaluate_scores(&s, &l, threshold)?;
    let (fs, fl) = flatten(&filter_scores(recs, kernel_s)?);
    let filtered = evaluate_scores(&fs, &fl, threshold)?;
    Ok(ScoreReport { raw, filtered })
}

/// Dimensionality reduction fitted on standardized rows.
pub fn fit_projection(b: &BaselineConfig, input: BaselineInput, z: ArrayView2<'_, f64>, y: &[u8], seed: u64) -> Result<Projection> {
    if input == BaselineInput::Transform {
        return Ok(Projection::None);
    }
    let d = z.ncols();
    Ok(match b.reduction {
        Reduction::None => Projection::None,
        Reduction::Rfe => {
            let idx = stratified_subsample(y, b.max_train, &mut rng::derived(seed, "rfe.subsample", 0));
            let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
            let m = rfe_select(z.select(Axis(0), &idx).view(), &ys, RFE_STEP, rfe_dim(b.rfe_m, d))?;
            Projection::Select(m.selected)
        }
        Reduction::Pca => Projection::Pca(pca_fit(z, pca_dim(b.pca_n, d))?),
    })
}

/// Fit a baseline classifier on prepared rows.
pub fn fit_classifier(family: Family, b: &BaselineConfig, x: ArrayView2<'_, f64>, y: &[u8], seed: u64) -> Result<BaselineModel> {
    Ok(match family {
        Family::Nb => BaselineModel::NaiveBayes(nb_fit(x, y)?),
        Family::Rf => BaselineModel::RandomForest(rf_fit(x, y, b.rf_trees, rng::derive_seed(seed, "rf", 0))?),
        Family::Svm => {
            let idx = stratified_subsample(y, b.max_train, &mut rng::derived(seed, "svm.subsample", 0));
            let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
            let gamma = b.svm_gamma_scale / x.ncols().max(1) as f64;
            BaselineModel::Svm(svm_fit(x.select(Axis(0), &idx).view(), &ys, b.svm_c, gamma)?)
        }
        Family::Cnn | Family::Mlp => return Err(Error::Config(format!("{} is not a baseline family", family.as_str()))),
    })
}

fn baseline_params(m: &BaselineModel) -> usize {
    match m {
        BaselineModel::NaiveBayes(nb) => 4 * nb.n_features() + 2,
        BaselineModel::RandomForest(rf) => rf.trees.iter().map(|t| t.nodes.len()).sum(),
        BaselineModel::Svm(s) => s.dual_coef.len() * (s.n_features() + 1) + 1,
    }
}

/// Training outcome: the model plus any per-epoch history.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: LoadedModel,
    pub history: Vec<EpochStats>,
    /// Units (patches or frames) the model was trained on.
    pub n_units: usize,
}

pub fn fit(cfg: &PipelineConfig, train_set: &Corpus) -> Result<Fitted> {
    let family = cfg.model.family;
    let mut meta = ModelMeta {
        name: cfg.model_name(),
        family,
        input: if family.is_neural() { BaselineInput::Transform } else { cfg.model.baseline.input },
        signal: cfg.signal.clone(),
        transform: cfg.transform.clone(),
        standardization: None,
        selected_features: None,
        n_inputs: 0,
        n_params: 0,
        config_sha256: cfg.sha256()?,
    };
    if family.is_neural() {
        let spec = cfg.model_spec()?;
        let t = Transformer::new(&cfg.transform, &cfg.signal)?;
        let images = labelled_images(&t, train_set)?;
        let stats = Standardization::fit(images.iter().map(|li| &li.image));
        let refs: Vec<_> = images.iter().collect();
        let ds = patches(&refs, stats, cfg.signal.w1)?;
        drop(images);
        let model = train(&spec, &ds, &cfg.train_config("train", 0))?;
        meta.standardization = Some(stats);
        meta.n_inputs = ds.patch_len();
        meta.n_params = model.n_params();
        let history = model.history.clone();
        Ok(Fitted { model: LoadedModel { meta, predictor: Predictor::Neural(model) }, history, n_units: ds.len() })
    } else {
        let b = &cfg.model.baseline;
        let src = RowSource::new(&cfg.transform, &cfg.signal, b.input)?;
        let rows = src.corpus_rows(train_set)?;
        let (x, y) = stack(&rows.iter().collect::<Vec<_>>());
        drop(rows);
        let mut prep = FeaturePrep::zscore(x.view());
        let z = prep.standardize_rows(x.view());
        prep.projection = fit_projection(b, b.input, z.view(), &y, cfg.seed)?;
        let zp = prep.project_rows(z.view());
        let model = fit_classifier(family, b, zp.view(), &y, cfg.seed)?;
        meta.n_inputs = prep.n_inputs();
        if let Projection::Select(idx) = &prep.projection {
            meta.selected_features = Some(idx.clone());
        }
        meta.n_params = baseline_params(&model);
        Ok(Fitted { model: LoadedModel { meta, predictor: Predictor::Baseline { model, prep } }, history: Vec::new(), n_units: y.len() })
    }
}

impl LoadedModel {
    /// Write the model and its sidecars; returns every file written.
    pub fn save(&self, path: &Path, history: &[EpochStats]) -> Result<Vec<PathBuf>> {
        let p = ModelPaths::of(path);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = vec![p.model.clone(), p.meta.clone()];
        match &self.predictor {
            Predictor::Neural(m) => {
                save_model(&p.model, m)?;
                write_history_csv(&p.history, history)?;
                out.push(p.history);
            }
            Predictor::Baseline { model, prep } => {
                save_baseline(&p.model, model)?;
                save_prep(&p.prep, prep)?;
                out.push(p.prep);
            }
        }
        std::fs::write(&p.meta, toml::to_string(&self.meta).map_err(|e| Error::Format(e.to_string()))?)?;
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let p = ModelPaths::of(path);
        if !p.model.is_file() {
            return Err(Error::invalid(format!("model file {} not found (run `train` first)", p.model.display())));
        }
        let text = std::fs::read_to_string(&p.meta)?;
        let meta: ModelMeta = toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", p.meta.display())))?;
        let predictor = if meta.family.is_neural() {
            let m = load_model(&p.model)?;
            if meta.standardization.is_none() {
                return Err(Error::Format("neural model metadata lacks standardization".into()));
            }
            Predictor::Neural(m)
        } else {
            let model = load_baseline(&p.model)?;
            let prep = load_prep(&p.prep)?;
            if model.n_features() != prep.n_outputs() {
                return Err(Error::Format(format!(
                    "classifier expects {} features but preprocessing yields {}",
                    model.n_features(),
                    prep.n_outputs()
                )));
            }
            Predictor::Baseline { model, prep }
        };
        Ok(Self { meta, predictor })
    }

    /// Config error when the model was trained on a different transform.
    pub fn check_compatible(&self, cfg: &PipelineConfig) -> Result<()> {
        if self.meta.input == BaselineInput::Transform && self.meta.transform.kind != cfg.transform.kind {
            return Err(Error::Config(format!(
                "model {} was trained on {} images but the config selects {}",
                self.meta.name,
                self.meta.transform.kind.as_str(),
                cfg.transform.kind.as_str()
            )));
        }
        Ok(())
    }

    pub fn scorer(&self) -> Result<Scorer<'_>> {
        let m = &self.meta;
        let source = match self.predictor {
            Predictor::Neural(_) => Source::Image(Transformer::new(&m.transform, &m.signal)?),
            Predictor::Baseline { .. } => Source::Rows(RowSource::new(&m.transform, &m.signal, m.input)?),
        };
        Ok(Scorer { model: self, source })
    }
}

enum Source {
    Image(Transformer),
    Rows(RowSource),
}

/// Applies a model to recordings, reusing its transform set-up.
pub struct Scorer<'a> {
    model: &'a LoadedModel,
    source: Source,
}

impl Scorer<'_> {
    /// Scores for one recording; labels are all 0 without a track.
    pub fn score(&self, rec: &Recording, track: Option<&LabelTrack>) -> Result<RecordingScores> {
        let meta = &self.model.meta;
        if rec.sample_rate != meta.signal.sample_rate {
            return Err(Error::invalid(format!(
                "{}: {} Hz recording for a {} Hz model",
                rec.id, rec.sample_rate, meta.signal.sample_rate
            )));
        }
        match (&self.source, &self.model.predictor) {
            (Source::Image(t), Predictor::Neural(m)) => {
                let li = labelled_image(t, rec, track)?;
                let stats = meta.standardization.expect("checked on load");
                let w1 = meta.signal.w1;
                let ds = patches(&[&li], stats, w1)?;
                let probs = predict_dataset(m, &ds)?;
                Ok(RecordingScores {
                    id: rec.id.clone(),
                    rate: li.image.frame_rate / w1 as f64,
                    scores: probs.column(1).to_vec(),
                    labels: ds.labels,
                })
            }
            (Source::Rows(src), Predictor::Baseline { model, prep }) => {
                let rows = src.rows(rec, track)?;
                let z = prep.apply_rows(rows.x.view())?;
                Ok(RecordingScores {
                    id: rec.id.clone(),
                    rate: rows.frame_rate,
                    scores: z.rows().into_iter().map(|r| model.predict_proba(&r.to_vec())[1]).collect(),
                    labels: rows.labels,
                })
            }
            _ => unreachable!("scorer source matches the predictor"),
        }
    }

    pub fn score_corpus(&self, corpus: &Corpus) -> Result<Vec<RecordingScores>> {
        corpus.iter().map(|(r, t)| self.score(r, Some(t))).collect()
    }
}


