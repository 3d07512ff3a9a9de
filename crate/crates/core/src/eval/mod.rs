//! Detection metrics, median-filter smoothing, the recording-level
//! cross-validation harness, class-conditional spectra and report export.

mod crossval;
mod export;
mod filter;
mod metrics;
mod spectra;

pub use crossval::{
    cnn_grid, crossval_grid, mlp_grid, pca_grid, recording_folds, rfe_grid, Folds, GridEntry, GridPoint, GridResult,
    CNN_K_GRID, CNN_ND_GRID, CNN_NK_GRID, DEFAULT_FOLDS, MLP_L_GRID, MLP_M_GRID, MLP_W1_GRID,
};
pub use export::{
    curve_svg, spectra_svg, svg_panels, write_curve_csv, write_grid_csv, write_report_csv, write_spectra_csv, Panel,
    Series,
};
pub use filter::{median_filter, median_filter_seconds, median_kernel_len};
pub use metrics::{
    confusion_metrics, evaluate_scores, pr_area, pr_curve, roc_area, roc_curve, ConfusionMetrics, EvalReport,
    DEFAULT_THRESHOLD,
};
pub use spectra::{class_spectra, standardize_spectrum, ClassSpectra, DEFAULT_TOP_FRAC};
