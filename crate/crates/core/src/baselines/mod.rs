//! Feature-based baseline classifiers. All expose class probabilities
//! `[p0, p1]` summing to one.

mod forest;
mod io;
mod linear_svm;
mod nb;
mod svm;

pub use io::{load_baseline, read_baseline, save_baseline, write_baseline};
pub use forest::{rf_fit, DecisionTree, Node, RfModel, DEFAULT_TREES, MIN_SAMPLES_SPLIT};
pub use linear_svm::LinearSvm;
pub use nb::{nb_fit, NbModel, VARIANCE_FLOOR};
pub use svm::{kkt_violation, platt_fit, rbf_gram, rbf_kernel, smo_solve, svm_fit, SmoSolution, SvmModel, KKT_TOL};

/// Cross-validation grid for the SVM penalty.
pub const SVM_C_GRID: [f64; 3] = [0.1, 1.0, 10.0];
/// Cross-validation grid for the RBF width, as multiples of `1/d`.
pub const SVM_GAMMA_GRID: [f64; 2] = [1.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineModel {
    NaiveBayes(NbModel),
    RandomForest(RfModel),
    Svm(SvmModel),
}

impl BaselineModel {
    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        match self {
            BaselineModel::NaiveBayes(m) => m.predict_proba(x),
            BaselineModel::RandomForest(m) => m.predict_proba(x),
            BaselineModel::Svm(m) => m.predict_proba(x),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            BaselineModel::NaiveBayes(m) => m.n_features(),
            BaselineModel::RandomForest(m) => m.n_features,
            BaselineModel::Svm(m) => m.n_features(),
        }
    }
}
