//! Recordings, label streams and the corpus they form.
//!
//! A corpus is an ordered list of `(Recording, LabelTrack)` pairs. Labels
//! arrive at the annotation rate (10 Hz) and are held onto the transform
//! frame grid with [`upsample_labels`].

mod labels;
mod resample;
mod synth;
mod wav;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use labels::{intervals_to_track, read_label_csv, write_label_csv, LabelEntry};
pub use resample::resample;
pub use synth::{synth_corpus, synth_recording, SynthConfig};
pub use wav::{load_wav, write_wav};

/// Rate at which annotators emit labels.
pub const LABEL_RATE_HZ: f64 = 10.0;

/// Rate every downstream transform assumes.
pub const DEFAULT_SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Recording {
    pub fn new(id: impl Into<String>, samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let id = id.into();
        if sample_rate == 0 {
            return Err(Error::invalid(format!("{id}: sample rate must be positive")));
        }
        if samples.is_empty() {
            return Err(Error::invalid(format!("{id}: recording has no samples")));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("{id}: non-finite sample at index {i}")));
        }
        Ok(Self { id, samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTrack {
    pub recording_id: String,
    pub labels: Vec<u8>,
    pub rate: f64,
}

impl LabelTrack {
    pub fn new(recording_id: impl Into<String>, labels: Vec<u8>, rate: f64) -> Result<Self> {
        let recording_id = recording_id.into();
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("{recording_id}: label rate must be positive")));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::invalid(format!("{recording_id}: labels must be 0 or 1")));
        }
        Ok(Self { recording_id, labels, rate })
    }

    pub fn count_ones(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Labels aligned one-per-column with a time–frequency image.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabels {
    pub labels: Vec<u8>,
    pub frame_rate: f64,
}

impl FrameLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Zero-order hold of `track` onto a frame grid: frame `k` takes the label at
/// `floor(k * rate / frame_rate)`, clamped to the last label.
pub fn upsample_labels(track: &LabelTrack, frame_rate: f64, n_frames: usize) -> Result<FrameLabels> {
    if track.labels.is_empty() {
        return Err(Error::invalid(format!("{}: empty label track", track.recording_id)));
    }
    if !(frame_rate >= track.rate) {
        return Err(Error::invalid(format!(
            "frame rate {frame_rate} Hz is below the label rate {} Hz",
            track.rate
        )));
    }
    let last = track.labels.len() - 1;
    let labels = (0..n_frames)
        .map(|k| {
            let src = ((k as f64 * track.rate) / frame_rate).floor() as usize;
            track.labels[src.min(last)]
        })
        .collect();
    Ok(FrameLabels { labels, frame_rate })
}

/// Seeded permutation of `0..n` cut into disjoint train and test index sets.
pub fn split_indices(n: usize, n_train: usize, n_test: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train + n_test > n {
        return Err(Error::invalid(format!(
            "cannot split {n} recordings into {n_train} train + {n_test} test"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let test = order[n_train..n_train + n_test].to_vec();
    order.truncate(n_train);
    Ok((order, test))
}

/// Recording-level split. No item appears on both sides.
pub fn split_corpus<T: Clone>(corpus: &[T], n_train: usize, n_test: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (tr, te) = split_indices(corpus.len(), n_train, n_test, seed)?;
    Ok((
        tr.iter().map(|&i| corpus[i].clone()).collect(),
        te.iter().map(|&i| corpus[i].clone()).collect(),
    ))
}

pub type Corpus = Vec<(Recording, LabelTrack)>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusManifest {
    sample_rate: u32,
    config: SynthConfig,
    recordings: Vec<ManifestEntry>,
}

/// Write `corpus` as `<id>.wav` files, a `labels.csv` and a `manifest.toml`.
pub fn write_corpus(dir: &Path, corpus: &[(Recording, LabelTrack)], cfg: &SynthConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(corpus.len());
    for (i, (rec, _)) in corpus.iter().enumerate() {
        write_wav(&dir.join(format!("{}.wav", rec.id)), rec)?;
        entries.push(ManifestEntry {
            id: rec.id.clone(),
            seed: synth::recording_seed(cfg.seed, i),
        });
    }
    let tracks: Vec<LabelTrack> = corpus.iter().map(|(_, t)| t.clone()).collect();
    write_label_csv(&dir.join("labels.csv"), &tracks)?;
    let manifest = CorpusManifest {
        sample_rate: corpus.first().map_or(DEFAULT_SAMPLE_RATE, |(r, _)| r.sample_rate),
        config: cfg.clone(),
        recordings: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

/// Load every labelled recording in `dir`, resampled to `sample_rate`.
///
/// Labels come from `labels` when given, else `dir/labels.csv`. Order follows
/// the label file.
pub fn load_corpus(dir: &Path, labels: Option<&Path>, sample_rate: u32) -> Result<Corpus> {
    let default_labels = dir.join("labels.csv");
    let entries = read_label_csv(labels.unwrap_or(&default_labels))?;
    let mut corpus = Vec::with_capacity(entries.len());
    for entry in entries {
        let path = dir.join(format!("{}.wav", entry.recording_id()));
        let mut rec = load_wav(&path)?;
        rec.id = entry.recording_id().to_string();
        let rec = resample(&rec, sample_rate)?;
        let track = match entry {
            LabelEntry::Track(t) => t,
            LabelEntry::Intervals { recording_id, spans } => {
                intervals_to_track(&recording_id, &spans, rec.duration_s(), LABEL_RATE_HZ)?
            }
        };
        corpus.push((rec, track));
    }
    if corpus.is_empty() {
        return Err(Error::invalid(format!("no labelled recordings found for {}", dir.display())));
    }
    Ok(corpus)
}
