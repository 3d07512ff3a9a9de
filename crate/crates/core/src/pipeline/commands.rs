//! The six pipeline commands. Each locks the output directory, writes its
//! artifacts and records their hashes in the run manifest.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, Axis};

use super::config::{BaselineInput, Family, PipelineConfig, Reduction};
use super::data::{self, class_presence, labelled_image, labelled_images, patches, positive_fraction, stack, RowSource, Transformer};
use super::model::{self, filter_scores, fit_classifier, LoadedModel, Predictor, RecordingScores, ScoreReport};
use super::prep::{FeaturePrep, Projection};
use super::run::RunDir;
use crate::baselines::{SVM_C_GRID, SVM_GAMMA_GRID};
use crate::corpus::{load_wav, resample, synth_corpus, write_corpus, Corpus, Recording};
use crate::error::{Error, Result};
use crate::eval::{
    class_spectra, cnn_grid, crossval_grid, mlp_grid, pca_grid, pr_area, recording_folds, rfe_grid, spectra_svg,
    svg_panels, write_curve_csv, write_grid_csv, write_report_csv, write_spectra_csv, ClassSpectra, GridPoint,
    GridResult, Panel, Series,
};
use crate::features::{pca_dim, pca_fit, rfe_dim, rfe_select, RfeModel, RFE_STEP};
use crate::neuralnet::{predict_dataset, train, CnnSpec, EpochStats, MlpSpec, ModelSpec};
use crate::rng;
use crate::transforms::{slice_patches, PatchDataset, Standardization};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}` (expected train or test)"))),
        }
    }
}

fn default_model_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.out_dir.join("models").join(format!("{}.model", cfg.model_name()))
}

fn load_for(cfg: &PipelineConfig, path: Option<&Path>) -> Result<LoadedModel> {
    let path = path.map_or_else(|| default_model_path(cfg), Path::to_path_buf);
    let m = LoadedModel::load(&path)?;
    m.check_compatible(cfg)?;
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct SynthSummary {
    pub dir: PathBuf,
    pub n_recordings: usize,
    pub positive_fraction: f64,
}

/// Generate the synthetic corpus into the configured corpus directory.
pub fn cmd_synth(cfg: &PipelineConfig) -> Result<SynthSummary> {
    cfg.validate()?;
    let run = RunDir::open(&cfg.paths.out_dir)?;
    let sc = cfg.synth_config();
    let corpus = synth_corpus(&sc, cfg.signal.sample_rate)?;
    let dir = cfg.corpus_dir();
    write_corpus(&dir, &corpus, &sc)?;
    let mut files: Vec<PathBuf> = corpus.iter().map(|(r, _)| dir.join(format!("{}.wav", r.id))).collect();
    files.push(dir.join("labels.csv"));
    files.push(dir.join("manifest.toml"));
    run.record("synth", "synth", cfg, &files)?;
    let (ones, total) = corpus.iter().fold((0, 0), |(o, t), (_, l)| (o + l.count_ones(), t + l.labels.len()));
    Ok(SynthSummary { dir, n_recordings: corpus.len(), positive_fraction: ones as f64 / total.max(1) as f64 })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub name: String,
    pub model_path: PathBuf,
    pub n_params: usize,
    pub n_units: usize,
    pub history: Vec<EpochStats>,
    /// 1-based epoch whose weights were kept (neural only).
    pub best_epoch: Option<usize>,
    /// Headline metrics: validation stats of the kept epoch for neural
    /// models, training-set fit for baselines.
    pub metrics: Vec<(String, f64)>,
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let run = RunDir::open(&cfg.paths.out_dir)?;
    let (train_set, _) = data::load_split(cfg)?;
    let fitted = model::fit(cfg, &train_set)?;
    let path = run.file("models", &format!("{}.model", fitted.model.meta.name))?;
    let files = fitted.model.save(&path, &fitted.history)?;
    let (best_epoch, metrics) = match &fitted.model.predictor {
        Predictor::Neural(m) => {
            let s = &m.history[m.best_epoch - 1];
            (
                Some(m.best_epoch),
                vec![
                    ("train_loss".into(), s.train_loss),
                    ("train_acc".into(), s.train_acc),
                    ("val_loss".into(), s.val_loss),
                    ("val_acc".into(), s.val_acc),
                ],
            )
        }
        Predictor::Baseline { .. } => {
            let scores = fitted.model.scorer()?.score_corpus(&train_set)?;
            let r = model::report_scores(&scores, cfg.eval.threshold, cfg.eval.median_kernel_s)?;
            (None, vec![("train_f1".into(), r.raw.f1), ("train_pr_area".into(), r.raw.pr_area)])
        }
    };
    run.record(&format!("train.{}", fitted.model.meta.name), "train", cfg, &files)?;
    Ok(TrainSummary {
        name: fitted.model.meta.name.clone(),
        model_path: path,
        n_params: fitted.model.meta.n_params,
        n_units: fitted.n_units,
        history: fitted.history,
        best_epoch,
        metrics,
    })
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub name: String,
    pub split: Split,
    pub report: ScoreReport,
    pub files: Vec<PathBuf>,
}

fn write_scores_csv(path: &Path, raw: &[RecordingScores], filtered: &[RecordingScores], threshold: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["recording_id", "index", "start_s", "label", "p1", "p1_filtered", "detected"])?;
    for (r, f) in raw.iter().zip(filtered) {
        for i in 0..r.scores.len() {
            w.write_record([
                r.id.clone(),
                i.to_string(),
                format!("{:.6}", i as f64 / r.rate),
                r.labels[i].to_string(),
                format!("{:.9}", r.scores[i]),
                format!("{:.9}", f.scores[i]),
                u8::from(f.scores[i] >= threshold).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Score `split` with a trained model and write reports, curves and scores.
pub fn cmd_eval(cfg: &PipelineConfig, model_path: Option<&Path>, split: Split) -> Result<EvalSummary> {
    cfg.validate()?;
    let run = RunDir::open(&cfg.paths.out_dir)?;
    let m = load_for(cfg, model_path)?;
    let (train_set, test_set) = data::load_split(cfg)?;
    let corpus = if split == Split::Train { &train_set } else { &test_set };
    let scores = m.scorer()?.score_corpus(corpus)?;
    let report = model::report_scores(&scores, cfg.eval.threshold, cfg.eval.median_kernel_s)?;
    let filtered = filter_scores(&scores, cfg.eval.median_kernel_s)?;

    let stem = format!("{}_{}", m.meta.name, split.as_str());
    let mut files = Vec::new();
    let p = run.file("reports", &format!("{stem}.csv"))?;
    write_report_csv(&p, &[(stem.clone(), report.raw.clone()), (format!("{stem}_filtered"), report.filtered.clone())])?;
    files.push(p);
    let p = run.file("reports", &format!("{stem}_scores.csv"))?;
    write_scores_csv(&p, &scores, &filtered, cfg.eval.threshold)?;
    files.push(p);
    for (suffix, r) in [("", &report.raw), ("_filtered", &report.filtered)] {
        let p = run.file("curves", &format!("{stem}_roc{suffix}.csv"))?;
        write_curve_csv(&p, ["fpr", "tpr"], &r.roc_points)?;
        files.push(p);
        let p = run.file("curves", &format!("{stem}_pr{suffix}.csv"))?;
        write_curve_csv(&p, ["recall", "precision"], &r.pr_points)?;
        files.push(p);
    }
    let roc_title = format!("{stem}: ROC");
    let pr_title = format!("{stem}: precision-recall");
    let svg = svg_panels(&[
        Panel {
            title: &roc_title,
            x_label: "false positive rate",
            y_label: "true positive rate",
            series: vec![
                Series { name: "raw", points: &report.raw.roc_points, dashed: false },
                Series { name: "median filtered", points: &report.filtered.roc_points, dashed: true },
            ],
        },
        Panel {
            title: &pr_title,
            x_label: "recall",
            y_label: "precision",
            series: vec![
                Series { name: "raw", points: &report.raw.pr_points, dashed: false },
                Series { name: "median filtered", points: &report.filtered.pr_points, dashed: true },
            ],
        },
    ]);
    let p = run.file("curves", &format!("{stem}.svg"))?;
    std::fs::write(&p, svg)?;
    files.push(p);
    run.record(&format!("eval.{stem}"), "eval", cfg, &files)?;
    Ok(EvalSummary { name: m.meta.name, split, report, files })
}

#[derive(Debug, Clone)]
pub struct PredictSummary {
    pub name: String,
    pub scores: Vec<RecordingScores>,
    pub filtered: Vec<RecordingScores>,
    pub file: PathBuf,
}

fn collect_wavs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(Error::invalid(format!("input {} does not exist", p.display())));
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no WAV inputs to score"));
    }
    Ok(out)
}

/// Score unlabelled WAV files (or directories of them).
pub fn cmd_predict(cfg: &PipelineConfig, model_path: Option<&Path>, inputs: &[PathBuf]) -> Result<PredictSummary> {
    cfg.validate()?;
    let run = RunDir::open(&cfg.paths.out_dir)?;
    let m = load_for(cfg, model_path)?;
    let scorer = m.scorer()?;
    let mut scores = Vec::new();
    for path in collect_wavs(inputs)? {
        let rec: Recording = resample(&load_wav(&path)?, m.meta.signal.sample_rate)?;
        scores.push(scorer.score(&rec, None)?);
    }
    let filtered = filter_scores(&scores, cfg.eval.median_kernel_s)?;
    let file = run.file("reports", &format!("predictions_{}.csv", m.meta.name))?;
    write_scores_csv(&file, &scores, &filtered, cfg.eval.threshold)?;
    run.record(&format!("predict.{}", m.meta.name), "predict", cfg, std::slice::from_ref(&file))?;
    Ok(PredictSummary { name: m.meta.name, scores, filtered, file })
}

#[derive(Debug, Clone)]
pub struct VisualizeSummary {
    pub name: String,
    pub spectra: ClassSpectra,
    pub files: Vec<PathBuf>,
}

/// Patches of the model's time-frequency image, one per scored unit.
fn unit_patches(t: &Transformer, corpus: &Corpus, w1: usize) -> Result<PatchDataset> {
    let mut out = PatchDataset::empty(t.h1, w1);
    for (r, l) in corpus {
        let li = labelled_image(t, r, Some(l))?;
        out.extend(&slice_patches(&li.image, w1, &li.frames, &li.id)?)?;
    }
    Ok(out)
}

/// Class-conditional spectra: averages of the most confidently predicted
/// test patches per class, next to label-averaged training patches.
pub fn cmd_visualize(cfg: &PipelineConfig, model_path: Option<&Path>) -> Result<VisualizeSummary> {
    cfg.validate()?;
    let run = RunDir::open(&cfg.paths.out_dir)?;
    let m = load_for(cfg, model_path)?;
    let (train_set, test_set) = data::load_split(cfg)?;
    let t = Transformer::new(&m.meta.transform, &m.meta.signal)?;
    let w1 = if m.meta.family.is_neural() { m.meta.signal.w1 } else { 1 };
    let test = unit_patches(&t, &test_set, w1)?;
    let train_p = unit_patches(&t, &train_set, w1)?;
    let scores = m.scorer()?.score_corpus(&test_set)?;
    let p1: Vec<f64> = scores.iter().flat_map(|s| s.scores.iter().copied()).collect();
    if p1.len() != test.len() {
        return Err(Error::shape(format!("{} test units", test.len()), format!("{} scores", p1.len())));
    }
    let probs = Array2::from_shape_fn((p1.len(), 2), |(i, c)| if c == 1 { p1[i] } else { 1.0 - p1[i] });
    let freq_axis = t.apply(&test_set[0].0)?.freq_axis;
    let spectra = class_spectra(probs.view(), &test, &train_p, &freq_axis, cfg.eval.top_frac)?;
    let csv = run.file("spectra", &format!("{}_spectra.csv", m.meta.name))?;
    write_spectra_csv(&csv, &spectra)?;
    let svg = run.file("spectra", &format!("{}_spectra.svg", m.meta.name))?;
    std::fs::write(&svg, spectra_svg(&spectra, &m.meta.name))?;
    let files = vec![csv, svg];
    run.record(&format!("visualize.{}", m.meta.name), "visualize", cfg, &files)?;
    Ok(VisualizeSummary { name: m.meta.name, spectra, files })
}

#[derive(Debug, Clone)]
pub struct CrossvalSummary {
    pub name: String,
    pub result: GridResult,
    pub file: PathBuf,
}

fn svm_grid() -> Vec<GridPoint> {
    SVM_C_GRID
        .iter()
        .flat_map(|&c| SVM_GAMMA_GRID.iter().map(move |&g| GridPoint::new(&[("c", c), ("gamma_scale", g)])))
        .collect()
}

/// Keep the configured subset of `grid`; every requested point must exist.
fn restrict(grid: Vec<GridPoint>, wanted: &[String]) -> Result<Vec<GridPoint>> {
    if wanted.is_empty() {
        return Ok(grid);
    }
    let norm = |s: &str| s.replace(' ', "");
    let names: Vec<String> = grid.iter().map(|p| norm(&p.to_string())).collect();
    for w in wanted {
        if !names.contains(&norm(w)) {
            return Err(Error::Config(format!("crossval point `{w}` is not in the grid (e.g. `{}`)", grid[0])));
        }
    }
    Ok(grid.into_iter().zip(names).filter(|(_, n)| wanted.iter().any(|w| norm(w) == *n)).map(|(p, _)| p).collect())
}

fn neural_spec(cfg: &PipelineConfig, p: &GridPoint) -> Result<ModelSpec> {
    let (h1, dropout_p) = (cfg.signal.h1, cfg.model.dropout_p);
    Ok(match cfg.model.family {
        Family::Cnn => ModelSpec::Cnn(CnnSpec {
            h1,
            w1: cfg.signal.w1,
            k: p.get_usize("k")?,
            n_k: p.get_usize("n_k")?,
            n_d: p.get_usize("n_d")?,
            dropout_p,
        }),
        _ => ModelSpec::Mlp(MlpSpec { h1, w1: p.get_usize("w1")?, l: p.get_usize("l")?, m: p.get_usize("m")?, dropout_p }),
    })
}

fn crossval_neural(cfg: &PipelineConfig, train_set: &Corpus) -> Result<GridResult> {
    let grid = restrict(if cfg.model.family == Family::Cnn { cnn_grid() } else { mlp_grid() }, &cfg.crossval.points)?;
    let t = Transformer::new(&cfg.transform, &cfg.signal)?;
    let images = labelled_images(&t, train_set)?;
    let presence: Vec<[bool; 2]> = images.iter().map(|li| class_presence(&li.frames.labels)).collect();
    let frac: Vec<f64> = images.iter().map(|li| positive_fraction(&li.frames.labels)).collect();
    let folds = recording_folds(&presence, &frac, cfg.crossval.folds, cfg.seed)?;
    let n_params = |p: &GridPoint| neural_spec(cfg, p).map_or(usize::MAX, |s| s.n_params());
    crossval_grid(&grid, folds.len(), n_params, |p, f| {
        let spec = neural_spec(cfg, p)?;
        let w1 = spec.input_dims().1;
        let (tr, va) = folds.split(f);
        let tr: Vec<_> = tr.iter().map(|&i| &images[i]).collect();
        let va: Vec<_> = va.iter().map(|&i| &images[i]).collect();
        let stats = Standardization::fit(tr.iter().map(|li| &li.image));
        let model = train(&spec, &patches(&tr, stats, w1)?, &cfg.train_config("crossval", f as u64))?;
        let val = patches(&va, stats, w1)?;
        let probs = predict_dataset(&model, &val)?;
        pr_area(&probs.column(1).to_vec(), &val.labels)
    })
}

/// Fold-level standardized rows, shared by every grid point.
struct FoldRows {
    prep: FeaturePrep,
    z_train: Array2<f64>,
    y_train: Vec<u8>,
    z_val: Array2<f64>,
    y_val: Vec<u8>,
}

fn crossval_baseline(cfg: &PipelineConfig, train_set: &Corpus) -> Result<(String, GridResult)> {
    let b = &cfg.model.baseline;
    let family = cfg.model.family;
    let d_in = crate::features::FEATURE_DIM;
    let (grid_name, grid) = match (b.input, b.reduction, family) {
        (BaselineInput::Features, Reduction::Rfe, _) => ("rfe", rfe_grid()),
        (BaselineInput::Features, Reduction::Pca, _) => ("pca", pca_grid()),
        (_, _, Family::Svm) => ("c_gamma", svm_grid()),
        _ => {
            return Err(Error::Config(format!(
                "no hyperparameter grid for {} on {} input without rfe/pca reduction",
                family.as_str(),
                if b.input == BaselineInput::Features { "features" } else { "transform" }
            )))
        }
    };
    let grid = restrict(grid, &cfg.crossval.points)?;
    let src = RowSource::new(&cfg.transform, &cfg.signal, b.input)?;
    let rows = src.corpus_rows(train_set)?;
    let presence: Vec<[bool; 2]> = rows.iter().map(|r| class_presence(&r.labels)).collect();
    let frac: Vec<f64> = rows.iter().map(|r| positive_fraction(&r.labels)).collect();
    let folds = recording_folds(&presence, &frac, cfg.crossval.folds, cfg.seed)?;
    let d_rows = rows.first().map_or(0, |r| r.x.ncols());

    let fold_rows = |f: usize| -> FoldRows {
        let (tr, va) = folds.split(f);
        let (x_tr, y_train) = stack(&tr.iter().map(|&i| &rows[i]).collect::<Vec<_>>());
        let (x_va, y_val) = stack(&va.iter().map(|&i| &rows[i]).collect::<Vec<_>>());
        let prep = FeaturePrep::zscore(x_tr.view());
        FoldRows { z_train: prep.standardize_rows(x_tr.view()), z_val: prep.standardize_rows(x_va.view()), prep, y_train, y_val }
    };
    // Rows per fold and one elimination run per fold (down to the smallest
    // requested size) are reused across grid points.
    let mut cache: HashMap<usize, FoldRows> = HashMap::new();
    let mut rfe_cache: HashMap<usize, RfeModel> = HashMap::new();
    let min_rfe = grid.iter().filter_map(|p| p.get("m")).map(|m| rfe_dim(m as u32, d_in)).min().unwrap_or(d_in);

    let n_params = |p: &GridPoint| -> usize {
        match grid_name {
            "rfe" => rfe_dim(p.get("m").unwrap_or(0.0) as u32, d_in),
            "pca" => pca_dim(p.get("n").unwrap_or(0.0) as u32, d_in),
            _ => d_rows,
        }
    };
    let result = crossval_grid(&grid, folds.len(), n_params, |p, f| {
        let fr = cache.entry(f).or_insert_with(|| fold_rows(f));
        let mut bc = b.clone();
        let projection = match grid_name {
            "rfe" => {
                let rfe = match rfe_cache.entry(f) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => {
                        let idx = data::stratified_subsample(&fr.y_train, b.max_train, &mut rng::derived(cfg.seed, "rfe.subsample", f as u64));
                        let ys: Vec<u8> = idx.iter().map(|&i| fr.y_train[i]).collect();
                        e.insert(rfe_select(fr.z_train.select(Axis(0), &idx).view(), &ys, RFE_STEP, min_rfe)?)
                    }
                };
                Projection::Select(rfe.survivors(rfe_dim(p.get("m").unwrap_or(0.0) as u32, d_in))?)
            }
            "pca" => Projection::Pca(pca_fit(fr.z_train.view(), pca_dim(p.get("n").unwrap_or(0.0) as u32, d_in))?),
            _ => {
                bc.svm_c = p.get("c").unwrap_or(b.svm_c);
                bc.svm_gamma_scale = p.get("gamma_scale").unwrap_or(b.svm_gamma_scale);
                model::fit_projection(b, b.input, fr.z_train.view(), &fr.y_train, cfg.seed)?
            }
        };
        let prep = FeaturePrep { projection, ..fr.prep.clone() };
        let clf = fit_classifier(family, &bc, prep.project_rows(fr.z_train.view()).view(), &fr.y_train, cfg.seed)?;
        let zv = prep.project_rows(fr.z_val.view());
        let s: Vec<f64> = zv.rows().into_iter().map(|r| clf.predict_proba(&r.to_vec())[1]).collect();
        pr_area(&s, &fr.y_val)
    })?;
    Ok((grid_name.to_string(), result))
}

/// Recording-level k-fold grid search on the training split, scored by
/// area under the precision-recall curve.
pub fn cmd_crossval(cfg: &PipelineConfig) -> Result<CrossvalSummary> {
    cfg.validate()?;
    let run = RunDir::open(&cfg.paths.out_dir)?;
    let (train_set, _) = data::load_split(cfg)?;
    let family = cfg.model.family;
    let (name, result) = if family.is_neural() {
        (format!("{}_{}", family.as_str(), cfg.transform.kind.as_str()), crossval_neural(cfg, &train_set)?)
    } else {
        let (g, r) = crossval_baseline(cfg, &train_set)?;
        (format!("{}_{g}", family.as_str()), r)
    };
    let file = run.file("reports", &format!("crossval_{name}.csv"))?;
    write_grid_csv(&file, &result)?;
    run.record(&format!("crossval.{name}"), "crossval", cfg, std::slice::from_ref(&file))?;
    Ok(CrossvalSummary { name, result, file })
}
