//! Acoustic event detection on short time–frequency patches.
//!
//! Recordings are turned into log-magnitude STFT spectrograms or bump-wavelet
//! scalograms, sliced into fixed-width labelled patches, and classified by a
//! single-convolution CNN, an MLP, or feature-based baselines (naive Bayes,
//! random forest, RBF SVM). Evaluation covers F1/TPR/TNR, ROC and PR areas,
//! median-filter smoothing, grid cross-validation and per-class mean spectra
//! of the highest-scoring patches.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
mod binio;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod neuralnet;
pub mod pipeline;
pub mod rng;
pub mod transforms;

pub use error::{Error, Result};
