//! End-to-end pipeline: configuration, data preparation, model fitting and
//! the `synth`/`train`/`eval`/`predict`/`crossval`/`visualize` commands.

mod commands;
mod config;
pub mod data;
mod model;
mod prep;
mod run;

pub use commands::{
    cmd_crossval, cmd_eval, cmd_predict, cmd_synth, cmd_train, cmd_visualize, CrossvalSummary, EvalSummary,
    PredictSummary, Split, SynthSummary, TrainSummary, VisualizeSummary,
};
pub use config::{
    apply_override, BaselineConfig, BaselineInput, CrossvalConfig, EvalConfig, Family, ModelConfig, PathsConfig,
    PipelineConfig, Reduction, SignalConfig, SplitConfig, TrainSection, TransformConfig,
};
pub use model::{
    filter_scores, fit, fit_classifier, fit_projection, report_scores, Fitted, LoadedModel, ModelMeta, ModelPaths,
    Predictor, RecordingScores, ScoreReport, Scorer,
};
pub use prep::{load_prep, read_prep, save_prep, write_prep, FeaturePrep, Projection};
pub use run::{sha256_file, ManifestEntry, RunDir, RunLock, RunManifest, LOCK_FILE, MANIFEST_FILE};
