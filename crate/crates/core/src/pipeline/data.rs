//! Corpus loading, transforms and per-recording design matrices.

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::config::{BaselineInput, PipelineConfig, SignalConfig, TransformConfig};
use crate::corpus::{load_corpus, split_corpus, upsample_labels, Corpus, FrameLabels, LabelTrack, Recording};
use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::rng::{self, Rng};
use crate::transforms::{
    cwt_scalogram, scales_for_band, slice_patches, stft_spectrogram, PatchDataset, Standardization, TimeFrequencyImage,
    TransformKind, WaveletBank,
};

/// Train and test recordings of the configured corpus.
pub fn load_split(cfg: &PipelineConfig) -> Result<(Corpus, Corpus)> {
    let dir = cfg.corpus_dir();
    if !dir.is_dir() {
        return Err(Error::invalid(format!(
            "corpus directory {} does not exist (run `synth` first or set paths.corpus_dir)",
            dir.display()
        )));
    }
    let corpus = load_corpus(&dir, cfg.paths.labels.as_deref(), cfg.signal.sample_rate)?;
    split_corpus(&corpus, cfg.split.n_train, cfg.split.n_test, rng::derive_seed(cfg.seed, "split", 0))
}

#[derive(Debug, Clone)]
pub struct Transformer {
    pub kind: TransformKind,
    pub h1: usize,
    bank: Option<WaveletBank>,
}

impl Transformer {
    pub fn new(t: &TransformConfig, s: &SignalConfig) -> Result<Self> {
        let h1 = s.h1;
        let bank = match t.kind {
            TransformKind::Stft => None,
            TransformKind::Cwt => Some(scales_for_band(h1, t.f_min, t.f_max, t.mu, t.sigma, f64::from(s.sample_rate))?),
        };
        Ok(Self { kind: t.kind, h1, bank })
    }

    pub fn apply(&self, rec: &Recording) -> Result<TimeFrequencyImage> {
        match &self.bank {
            None => stft_spectrogram(rec, self.h1),
            Some(b) => cwt_scalogram(rec, b),
        }
    }
}

/// A transformed recording with labels on its frame grid.
#[derive(Debug, Clone)]
pub struct LabelledImage {
    pub id: String,
    pub image: TimeFrequencyImage,
    pub frames: FrameLabels,
}

fn frame_labels(track: Option<&LabelTrack>, frame_rate: f64, n: usize) -> Result<FrameLabels> {
    match track {
        Some(t) => upsample_labels(t, frame_rate, n),
        None => Ok(FrameLabels { labels: vec![0; n], frame_rate }),
    }
}

pub fn labelled_image(t: &Transformer, rec: &Recording, track: Option<&LabelTrack>) -> Result<LabelledImage> {
    let image = t.apply(rec)?;
    let frames = frame_labels(track, image.frame_rate, image.n_columns())?;
    Ok(LabelledImage { id: rec.id.clone(), image, frames })
}

pub fn labelled_images(t: &Transformer, corpus: &Corpus) -> Result<Vec<LabelledImage>> {
    corpus.iter().map(|(r, l)| labelled_image(t, r, Some(l))).collect()
}

/// Standardized, non-overlapping `w1` patches of every image, in order.
pub fn patches(images: &[&LabelledImage], stats: Standardization, w1: usize) -> Result<PatchDataset> {
    let h1 = images.first().map_or(0, |i| i.image.h1());
    let mut out = PatchDataset::empty(h1, w1);
    for li in images {
        out.extend(&slice_patches(&stats.apply(&li.image), w1, &li.frames, &li.id)?)?;
    }
    Ok(out)
}

/// One row per frame for a baseline classifier.
#[derive(Debug, Clone)]
pub struct RecordingRows {
    pub id: String,
    pub x: Array2<f64>,
    pub labels: Vec<u8>,
    pub frame_rate: f64,
}

pub struct RowSource {
    input: BaselineInput,
    transformer: Transformer,
    extractor: Option<FeatureExtractor>,
    frame_rate: f64,
}

impl RowSource {
    pub fn new(t: &TransformConfig, s: &SignalConfig, input: BaselineInput) -> Result<Self> {
        let extractor = match input {
            BaselineInput::Features => Some(FeatureExtractor::new(s.sample_rate, s.h1)?),
            BaselineInput::Transform => None,
        };
        Ok(Self {
            input,
            transformer: Transformer::new(t, s)?,
            extractor,
            frame_rate: f64::from(s.sample_rate) / s.h1 as f64,
        })
    }

    pub fn rows(&self, rec: &Recording, track: Option<&LabelTrack>) -> Result<RecordingRows> {
        let x = match (self.input, &self.extractor) {
            (BaselineInput::Features, Some(fx)) => {
                let fvs = fx.extract_recording(rec)?;
                let d = fvs.first().map_or(0, |f| f.values.len());
                Array2::from_shape_vec((fvs.len(), d), fvs.into_iter().flat_map(|f| f.values).collect())
                    .map_err(|e| Error::invalid(e.to_string()))?
            }
            _ => self.transformer.apply(rec)?.values.t().to_owned(),
        };
        let fl = frame_labels(track, self.frame_rate, x.nrows())?;
        Ok(RecordingRows { id: rec.id.clone(), x, labels: fl.labels, frame_rate: self.frame_rate })
    }

    pub fn corpus_rows(&self, corpus: &Corpus) -> Result<Vec<RecordingRows>> {
        corpus.iter().map(|(r, l)| self.rows(r, Some(l))).collect()
    }
}

/// Stack the rows of several recordings.
pub fn stack(parts: &[&RecordingRows]) -> (Array2<f64>, Vec<u8>) {
    let d = parts.first().map_or(0, |p| p.x.ncols());
    let n: usize = parts.iter().map(|p| p.x.nrows()).sum();
    let mut x = Array2::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    let mut at = 0;
    for p in parts {
        x.slice_mut(ndarray::s![at..at + p.x.nrows(), ..]).assign(&p.x);
        y.extend_from_slice(&p.labels);
        at += p.x.nrows();
    }
    (x, y)
}

/// At most `cap` indices, drawn per class in proportion to its size, sorted.
pub fn stratified_subsample(labels: &[u8], cap: usize, r: &mut Rng) -> Vec<usize> {
    let n = labels.len();
    if n <= cap {
        return (0..n).collect();
    }
    let mut out = Vec::with_capacity(cap);
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        let take = ((cap as f64 * idx.len() as f64 / n as f64).round() as usize).clamp(usize::from(!idx.is_empty()), idx.len());
        idx.shuffle(r);
        out.extend_from_slice(&idx[..take]);
    }
    out.sort_unstable();
    out
}

pub fn class_presence(labels: &[u8]) -> [bool; 2] {
    [labels.contains(&0), labels.contains(&1)]
}

pub fn positive_fraction(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        0.0
    } else {
        labels.iter().filter(|&&l| l == 1).count() as f64 / labels.len() as f64
    }
}
