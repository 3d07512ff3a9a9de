//! Time–frequency transforms and patch slicing.
//!
//! Both transforms produce an `h1 × T` log-magnitude image on the same
//! `fs / h1` frame grid, rows ordered by ascending frequency.

mod stft;
mod wavelet;

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::FrameLabels;
use crate::error::{Error, Result};

pub use stft::{frame_at, hann, stft_columns, stft_spectrogram, FrameTransform};
pub use wavelet::{
    bump_wavelet_fourier, center_frequency, cwt_scalogram, scales_for_band, WaveletBank, DEFAULT_F_MAX,
    DEFAULT_F_MIN, DEFAULT_MU, DEFAULT_SIGMA,
};

/// Additive floor applied before every logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

pub(crate) fn log_floor(x: f64) -> f64 {
    (LOG_FLOOR + x).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Stft,
    Cwt,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::Stft => "stft",
            TransformKind::Cwt => "cwt",
        }
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stft" => Ok(TransformKind::Stft),
            "cwt" | "wavelet" => Ok(TransformKind::Cwt),
            other => Err(Error::Config(format!("unknown transform kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrequencyImage {
    /// `h1` rows (frequency) by `T` columns (time).
    pub values: Array2<f64>,
    pub freq_axis: Vec<f64>,
    pub frame_rate: f64,
    pub kind: TransformKind,
}

const IMAGE_MAGIC: &[u8; 4] = b"AETF";
const IMAGE_VERSION: u16 = 1;

impl TimeFrequencyImage {
    pub fn h1(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.values.ncols()
    }

    /// Binary container: magic `AETF`, u16 version, u8 kind (0 stft, 1 cwt),
    /// u8 pad, u32 h1, u32 T, f64 frame rate, h1 × f64 frequency axis, then
    /// h1·T row-major f32 values. Little-endian throughout.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(IMAGE_MAGIC)?;
        w.write_all(&IMAGE_VERSION.to_le_bytes())?;
        w.write_all(&[u8::from(self.kind == TransformKind::Cwt), 0])?;
        w.write_all(&(self.h1() as u32).to_le_bytes())?;
        w.write_all(&(self.n_columns() as u32).to_le_bytes())?;
        w.write_all(&self.frame_rate.to_le_bytes())?;
        for f in &self.freq_axis {
            w.write_all(&f.to_le_bytes())?;
        }
        for v in self.values.iter() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != IMAGE_MAGIC {
            return Err(Error::Format("not a time-frequency image".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != IMAGE_VERSION {
            return Err(Error::Format("unsupported image version".into()));
        }
        r.read_exact(&mut b2)?;
        let kind = match b2[0] {
            0 => TransformKind::Stft,
            1 => TransformKind::Cwt,
            k => return Err(Error::Format(format!("unknown transform tag {k}"))),
        };
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let h1 = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let t = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let frame_rate = f64::from_le_bytes(b8);
        let mut freq_axis = Vec::with_capacity(h1);
        for _ in 0..h1 {
            r.read_exact(&mut b8)?;
            freq_axis.push(f64::from_le_bytes(b8));
        }
        let mut data = Vec::with_capacity(h1 * t);
        for _ in 0..h1 * t {
            r.read_exact(&mut b4)?;
            data.push(f64::from(f32::from_le_bytes(b4)));
        }
        let values = Array2::from_shape_vec((h1, t), data).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self { values, freq_axis, frame_rate, kind })
    }

    /// CSV for plotting: one row per frequency, `freq_hz,t0,t1,…`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["freq_hz".to_string()];
        header.extend((0..self.n_columns()).map(|t| format!("t{t}")));
        w.write_record(&header)?;
        for (k, f) in self.freq_axis.iter().enumerate() {
            let mut row = vec![f.to_string()];
            row.extend(self.values.row(k).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Global scalar standardization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

impl Standardization {
    /// Mean and population std over every value of every image. Zero
    /// variance gives `std = 1`.
    pub fn fit<'a>(images: impl IntoIterator<Item = &'a TimeFrequencyImage>) -> Self {
        let (mut n, mut sum, mut sum_sq) = (0usize, 0.0f64, 0.0f64);
        let images: Vec<&TimeFrequencyImage> = images.into_iter().collect();
        for img in &images {
            n += img.values.len();
            sum += img.values.sum();
        }
        if n == 0 {
            return Self { mean: 0.0, std: 1.0 };
        }
        let mean = sum / n as f64;
        for img in &images {
            sum_sq += img.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        }
        let std = (sum_sq / n as f64).sqrt();
        Self { mean, std: if std > 0.0 { std } else { 1.0 } }
    }

    pub fn apply(&self, img: &TimeFrequencyImage) -> TimeFrequencyImage {
        let mut out = img.clone();
        out.values.mapv_inplace(|v| (v - self.mean) / self.std);
        out
    }
}

/// Standardize with `stats` if given, else with statistics fitted to `img`.
pub fn standardize(img: &TimeFrequencyImage, stats: Option<Standardization>) -> (TimeFrequencyImage, Standardization) {
    let stats = stats.unwrap_or_else(|| Standardization::fit([img]));
    (stats.apply(img), stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMeta {
    pub recording_id: String,
    pub start_frame: usize,
}

/// `N` single-channel `h1 × w1` patches with binary labels.
///
/// Patch `i` occupies `patches[i*h1*w1 .. (i+1)*h1*w1]`, row-major
/// (frequency-major, then time).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatchDataset {
    pub h1: usize,
    pub w1: usize,
    pub patches: Vec<f32>,
    pub labels: Vec<u8>,
    pub meta: Vec<PatchMeta>,
}

impl PatchDataset {
    pub fn empty(h1: usize, w1: usize) -> Self {
        Self { h1, w1, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn patch_len(&self) -> usize {
        self.h1 * self.w1
    }

    pub fn patch(&self, i: usize) -> &[f32] {
        let d = self.patch_len();
        &self.patches[i * d..(i + 1) * d]
    }

    /// `[1, 0]` for class 0, `[0, 1]` for class 1.
    pub fn one_hot(&self, i: usize) -> [f32; 2] {
        if self.labels[i] == 1 {
            [0.0, 1.0]
        } else {
            [1.0, 0.0]
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    /// Append `other`, keeping its order after ours.
    pub fn extend(&mut self, other: &PatchDataset) -> Result<()> {
        if self.is_empty() && self.patches.is_empty() {
            self.h1 = other.h1;
            self.w1 = other.w1;
        } else if (self.h1, self.w1) != (other.h1, other.w1) && !other.is_empty() {
            return Err(Error::shape(
                format!("{}x{}", self.h1, self.w1),
                format!("{}x{}", other.h1, other.w1),
            ));
        }
        self.patches.extend_from_slice(&other.patches);
        self.labels.extend_from_slice(&other.labels);
        self.meta.extend(other.meta.iter().cloned());
        Ok(())
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PatchDataset>) -> Result<Self> {
        let mut out = PatchDataset::default();
        for p in parts {
            out.extend(p)?;
        }
        Ok(out)
    }

    /// Subset by indices, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut out = PatchDataset::empty(self.h1, self.w1);
        for &i in idx {
            out.patches.extend_from_slice(self.patch(i));
            out.labels.push(self.labels[i]);
            out.meta.push(self.meta[i].clone());
        }
        out
    }
}

/// Non-overlapping `w1`-column windows from column 0; the remainder is
/// dropped. A patch is labelled 1 when at least half its frame labels are 1.
pub fn slice_patches(img: &TimeFrequencyImage, w1: usize, fl: &FrameLabels, recording_id: &str) -> Result<PatchDataset> {
    if w1 == 0 {
        return Err(Error::invalid("w1 must be positive"));
    }
    if fl.len() != img.n_columns() {
        return Err(Error::shape(
            format!("{} frame labels", img.n_columns()),
            format!("{} frame labels", fl.len()),
        ));
    }
    let h1 = img.h1();
    let n = img.n_columns() / w1;
    let mut out = PatchDataset::empty(h1, w1);
    out.patches.reserve(n * h1 * w1);
    for p in 0..n {
        let start = p * w1;
        for k in 0..h1 {
            out.patches
                .extend((start..start + w1).map(|t| img.values[[k, t]] as f32));
        }
        let ones = fl.labels[start..start + w1].iter().filter(|&&l| l == 1).count();
        out.labels.push(u8::from(2 * ones >= w1));
        out.meta.push(PatchMeta { recording_id: recording_id.to_string(), start_frame: start });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(values: Array2<f64>) -> TimeFrequencyImage {
        let h1 = values.nrows();
        TimeFrequencyImage {
            values,
            freq_axis: (1..=h1).map(|k| k as f64).collect(),
            frame_rate: 31.25,
            kind: TransformKind::Stft,
        }
    }

    fn frames(labels: Vec<u8>) -> FrameLabels {
        FrameLabels { labels, frame_rate: 31.25 }
    }

    #[test]
    fn standardize_constant_image() {
        let (out, st) = standardize(&image(Array2::from_elem((3, 4), 2.5)), None);
        assert!(out.values.iter().all(|&v| v == 0.0));
        assert_eq!(st.std, 1.0);
    }

    #[test]
    fn standardize_two_points() {
        let img = image(Array2::from_shape_vec((1, 2), vec![0.0, 2.0]).unwrap());
        let (out, st) = standardize(&img, None);
        assert_eq!(out.values.as_slice().unwrap(), &[-1.0, 1.0]);
        assert_eq!(st, Standardization { mean: 1.0, std: 1.0 });
    }

    #[test]
    fn standardize_with_given_stats_is_affine() {
        let train = image(Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 2.0, 3.0]).unwrap());
        let (_, st) = standardize(&train, None);
        let shifted = image(train.values.mapv(|v| v + 5.0));
        let (out, st2) = standardize(&shifted, Some(st));
        assert_eq!(st2, st);
        assert!((out.values.mean().unwrap() - 5.0 / st.std).abs() < 1e-12);
    }

    #[test]
    fn slicing_drops_remainder() {
        let img = image(Array2::zeros((4, 46)));
        let ds = slice_patches(&img, 10, &frames(vec![0; 46]), "r").unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.meta[3].start_frame, 30);
    }

    #[test]
    fn width_one_copies_frame_labels() {
        let img = image(Array2::from_shape_fn((2, 5), |(k, t)| (10 * k + t) as f64));
        let labels = vec![0, 1, 1, 0, 1];
        let ds = slice_patches(&img, 1, &frames(labels.clone()), "r").unwrap();
        assert_eq!(ds.labels, labels);
        assert_eq!(ds.patch(3), &[3.0, 13.0]);
        assert_eq!(ds.one_hot(1), [0.0, 1.0]);
        assert_eq!(ds.one_hot(0), [1.0, 0.0]);
    }

    #[test]
    fn tie_goes_to_class_one() {
        let img = image(Array2::zeros((1, 10)));
        let ds = slice_patches(&img, 10, &frames(vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0]), "r").unwrap();
        assert_eq!(ds.labels, vec![1]);
        let ds = slice_patches(&img, 10, &frames(vec![1, 1, 1, 1, 0, 0, 0, 0, 0, 0]), "r").unwrap();
        assert_eq!(ds.labels, vec![0]);
    }

    #[test]
    fn wide_window_gives_empty_dataset() {
        let img = image(Array2::zeros((2, 5)));
        assert!(slice_patches(&img, 6, &frames(vec![0; 5]), "r").unwrap().is_empty());
        assert!(slice_patches(&img, 2, &frames(vec![0; 4]), "r").is_err());
    }

    #[test]
    fn patch_layout_is_frequency_major() {
        let img = image(Array2::from_shape_fn((3, 4), |(k, t)| (10 * k + t) as f64));
        let ds = slice_patches(&img, 2, &frames(vec![0; 4]), "r").unwrap();
        assert_eq!(ds.patch(1), &[2.0, 3.0, 12.0, 13.0, 22.0, 23.0]);
    }

    #[test]
    fn concat_counts_and_order() {
        let a = slice_patches(&image(Array2::zeros((2, 25))), 10, &frames(vec![0; 25]), "a").unwrap();
        let b = slice_patches(&image(Array2::ones((2, 31))), 10, &frames(vec![1; 31]), "b").unwrap();
        let all = PatchDataset::concat([&a, &b]).unwrap();
        assert_eq!(all.len(), 2 + 3);
        assert_eq!(all.meta[1].recording_id, "a");
        assert_eq!(all.meta[2].recording_id, "b");
        assert_eq!(all.class_counts(), [2, 3]);
    }

    #[test]
    fn binary_roundtrip() {
        let img = TimeFrequencyImage {
            values: Array2::from_shape_fn((3, 5), |(k, t)| k as f64 - 0.5 * t as f64),
            freq_axis: vec![10.0, 20.0, 40.0],
            frame_rate: 31.25,
            kind: TransformKind::Cwt,
        };
        let mut buf = Vec::new();
        img.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 2 + 2 + 4 + 4 + 8 + 3 * 8 + 15 * 4);
        assert_eq!(TimeFrequencyImage::read_binary(buf.as_slice()).unwrap(), img);
        buf[0] = b'X';
        assert!(TimeFrequencyImage::read_binary(buf.as_slice()).is_err());
    }
}
