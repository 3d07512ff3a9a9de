//! Hand-crafted per-frame audio features for the baseline classifiers.
//!
//! Each STFT frame yields a 304-dimensional vector:
//!
//! | segment            | dims | definition                                              |
//! |--------------------|------|---------------------------------------------------------|
//! | `stft_slice`       | 256  | `ln(1e-10 + |X_k|)`, bins 1..=256                         |
//! | `mel_cepstrum_slice` | 26 | `ln(1e-10 + E_m)`, triangular HTK-mel bands on `|X_k|²`   |
//! | `mfcc`             | 13   | orthonormal DCT-II of the mel log energies, coeffs 1..=13 |
//! | `zcr`              | 1    | sign changes / (len − 1)                                 |
//! | `energy_entropy`   | 1    | Shannon entropy (bits) of 8 sub-block energy shares      |
//! | `spectral_entropy` | 1    | Shannon entropy (bits) of normalized `|X_k|²`             |
//! | `flux`             | 1    | `Σ (p_k − q_k)²` of sum-normalized magnitudes vs previous |
//! | `rolloff`          | 1    | first bin holding 90% of `|X_k|²`, as fraction of Nyquist |
//! | `centroid`         | 1    | magnitude-weighted mean frequency / Nyquist              |
//! | `spread`           | 1    | magnitude-weighted std of frequency / Nyquist            |
//! | `entropy`          | 1    | Shannon entropy (bits) of normalized `|x_n|`              |
//! | `energy`           | 1    | `ln(1e-10 + mean x_n²)`                                   |
//!
//! Distributions with zero total mass have entropy, centroid, spread and
//! rolloff 0.

mod pca;
mod rfe;

use std::path::Path;

use crate::corpus::Recording;
use crate::error::{Error, Result};
use crate::transforms::{frame_at, stft_columns, FrameTransform, LOG_FLOOR};

pub use pca::{pca_dim, pca_fit, PcaModel, PCA_GRID};
pub use rfe::{rfe_dim, rfe_select, RfeModel, RFE_GRID, RFE_STEP};

pub const FEATURE_DIM: usize = 304;
/// Frame hop the layout is built for (the STFT slice has `h1` bins).
pub const FEATURE_H1: usize = 256;
pub const N_MEL: usize = 26;
pub const N_MFCC: usize = 13;
const N_SUBBLOCKS: usize = 8;
const ROLLOFF_FRACTION: f64 = 0.90;

/// `(name, width)` of each segment, in vector order.
pub const SEGMENTS: [(&str, usize); 12] = [
    ("stft_slice", 256),
    ("mel_cepstrum_slice", N_MEL),
    ("mfcc", N_MFCC),
    ("zcr", 1),
    ("energy_entropy", 1),
    ("spectral_entropy", 1),
    ("flux", 1),
    ("rolloff", 1),
    ("centroid", 1),
    ("spread", 1),
    ("entropy", 1),
    ("energy", 1),
];

/// Offset of a named segment within the vector.
pub fn segment_offset(name: &str) -> Option<usize> {
    let mut off = 0;
    for (n, w) in SEGMENTS {
        if n == name {
            return Some(off);
        }
        off += w;
    }
    None
}

/// Column names `segment.index`, e.g. `mfcc.0`.
pub fn feature_names() -> Vec<String> {
    SEGMENTS
        .iter()
        .flat_map(|(n, w)| (0..*w).map(move |i| format!("{n}.{i}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn segment(&self, name: &str) -> &[f64] {
        let off = segment_offset(name).expect("unknown feature segment");
        let width = SEGMENTS.iter().find(|(n, _)| *n == name).map(|s| s.1).unwrap_or(0);
        &self.values[off..off + width]
    }

    pub fn scalar(&self, name: &str) -> f64 {
        self.segment(name)[0]
    }
}

fn shannon_bits(weights: impl Iterator<Item = f64> + Clone) -> f64 {
    let total: f64 = weights.clone().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -weights
        .filter(|&w| w > 0.0)
        .map(|w| {
            let p = w / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Distribution statistics of a magnitude spectrum over bins `1..=n`, with
/// bin `k` at normalized frequency `k / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralShape {
    /// Shannon entropy (bits) of the normalized power spectrum.
    pub entropy: f64,
    pub rolloff: f64,
    pub centroid: f64,
    pub spread: f64,
}

impl SpectralShape {
    pub fn of(mag: &[f64]) -> Self {
        let n = mag.len() as f64;
        let freq = |k: usize| (k + 1) as f64 / n;
        let power: Vec<f64> = mag.iter().map(|m| m * m).collect();
        let entropy = shannon_bits(power.iter().copied());

        let power_total: f64 = power.iter().sum();
        let rolloff = if power_total > 0.0 {
            let mut acc = 0.0;
            let k = power
                .iter()
                .position(|p| {
                    acc += p;
                    acc >= ROLLOFF_FRACTION * power_total
                })
                .unwrap_or(power.len() - 1);
            freq(k)
        } else {
            0.0
        };

        let mag_total: f64 = mag.iter().sum();
        let (centroid, spread) = if mag_total > 0.0 {
            let c = mag.iter().enumerate().map(|(k, m)| freq(k) * m).sum::<f64>() / mag_total;
            let var = mag.iter().enumerate().map(|(k, m)| (freq(k) - c).powi(2) * m).sum::<f64>() / mag_total;
            (c, var.sqrt())
        } else {
            (0.0, 0.0)
        };
        Self { entropy, rolloff, centroid, spread }
    }
}

/// Squared distance between sum-normalized magnitude spectra.
pub fn spectral_flux(current: &[f64], previous: &[f64]) -> f64 {
    let norm = |s: &[f64]| -> Vec<f64> {
        let t: f64 = s.iter().sum();
        if t > 0.0 {
            s.iter().map(|x| x / t).collect()
        } else {
            vec![0.0; s.len()]
        }
    };
    let (p, q) = (norm(current), norm(previous));
    p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Per-frame feature extractor for `2·h1`-sample frames.
#[derive(Debug)]
pub struct FeatureExtractor {
    h1: usize,
    transform: FrameTransform,
    /// `N_MEL` rows of weights over bins 1..=h1.
    mel: Vec<Vec<f64>>,
    /// DCT-II basis rows for coefficients 1..=N_MFCC.
    dct: Vec<Vec<f64>>,
}

impl FeatureExtractor {
    /// The stft segment is 256 wide, so `h1` must be 256.
    pub fn new(sample_rate: u32, h1: usize) -> Result<Self> {
        if h1 != SEGMENTS[0].1 {
            return Err(Error::invalid(format!("feature layout needs h1 = 256, got {h1}")));
        }
        let fs = f64::from(sample_rate);
        let nyq = fs / 2.0;
        let bin_hz: Vec<f64> = (1..=h1).map(|k| k as f64 * fs / (2 * h1) as f64).collect();
        let top = hz_to_mel(nyq);
        let edges: Vec<f64> = (0..N_MEL + 2).map(|i| mel_to_hz(top * i as f64 / (N_MEL + 1) as f64)).collect();
        let mel = (0..N_MEL)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                bin_hz
                    .iter()
                    .map(|&f| {
                        if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let m = N_MEL as f64;
        let dct = (1..=N_MFCC)
            .map(|n| {
                (0..N_MEL)
                    .map(|j| (2.0 / m).sqrt() * (std::f64::consts::PI * n as f64 * (j as f64 + 0.5) / m).cos())
                    .collect()
            })
            .collect();
        Ok(Self { h1, transform: FrameTransform::new(h1), mel, dct })
    }

    /// Features of one frame plus its magnitude spectrum (bins 1..=h1), which
    /// the next call takes as `prev_spectrum` for the flux term.
    pub fn extract(&self, frame: &[f64], prev_spectrum: Option<&[f64]>) -> Result<(FeatureVector, Vec<f64>)> {
        if frame.is_empty() {
            return Err(Error::invalid("zero-length frame"));
        }
        if frame.len() > self.transform.window_len() {
            return Err(Error::invalid(format!(
                "frame of {} samples exceeds the {}-sample window",
                frame.len(),
                self.transform.window_len()
            )));
        }
        let mag = self.transform.magnitudes(frame);
        let power: Vec<f64> = mag.iter().map(|m| m * m).collect();
        let mut v = Vec::with_capacity(FEATURE_DIM);

        v.extend(mag.iter().map(|&m| (LOG_FLOOR + m).ln()));

        let mel_log: Vec<f64> = self
            .mel
            .iter()
            .map(|w| (LOG_FLOOR + w.iter().zip(&power).map(|(a, b)| a * b).sum::<f64>()).ln())
            .collect();
        v.extend_from_slice(&mel_log);
        v.extend(self.dct.iter().map(|row| row.iter().zip(&mel_log).map(|(a, b)| a * b).sum::<f64>()));

        // zero-crossing rate; zero counts as non-negative
        let crossings = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
        v.push(if frame.len() > 1 { crossings as f64 / (frame.len() - 1) as f64 } else { 0.0 });

        let block = frame.len().div_ceil(N_SUBBLOCKS);
        let energies: Vec<f64> = frame.chunks(block).map(|c| c.iter().map(|x| x * x).sum()).collect();
        v.push(shannon_bits(energies.iter().copied()));

        let shape = SpectralShape::of(&mag);
        v.push(shape.entropy);

        let flux = match prev_spectrum {
            Some(prev) if prev.len() == mag.len() => spectral_flux(&mag, prev),
            _ => 0.0,
        };
        v.push(flux);
        v.push(shape.rolloff);
        v.push(shape.centroid);
        v.push(shape.spread);

        v.push(shannon_bits(frame.iter().map(|x| x.abs())));
        v.push((LOG_FLOOR + frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64).ln());

        debug_assert_eq!(v.len(), FEATURE_DIM);
        Ok((FeatureVector { values: v }, mag))
    }

    /// One vector per STFT column of `r` (`floor(n / h1)` frames).
    pub fn extract_recording(&self, r: &Recording) -> Result<Vec<FeatureVector>> {
        let n = stft_columns(r.len(), self.h1);
        let mut prev: Option<Vec<f64>> = None;
        let mut out = Vec::with_capacity(n);
        for t in 0..n {
            let (fv, spec) = self.extract(frame_at(&r.samples, self.h1, t), prev.as_deref())?;
            out.push(fv);
            prev = Some(spec);
        }
        Ok(out)
    }
}

/// Write feature rows with a `segment.index` header.
pub fn write_feature_csv(path: &Path, rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(feature_names())?;
    for r in rows {
        w.write_record(r.values.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn extractor() -> FeatureExtractor {
        FeatureExtractor::new(8000, 256).unwrap()
    }

    #[test]
    fn layout_totals_304() {
        assert_eq!(SEGMENTS.iter().map(|s| s.1).sum::<usize>(), FEATURE_DIM);
        assert_eq!(feature_names().len(), FEATURE_DIM);
        assert_eq!(feature_names()[282], "mfcc.0");
        assert_eq!(segment_offset("energy"), Some(303));
    }

    #[test]
    fn alternating_frame_has_unit_zcr() {
        let frame: Vec<f64> = (0..512).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (fv, _) = extractor().extract(&frame, None).unwrap();
        assert_eq!(fv.scalar("zcr"), 1.0);
    }

    #[test]
    fn first_frame_has_zero_flux() {
        let frame: Vec<f64> = (0..512).map(|i| (i as f64 * 0.1).sin()).collect();
        let (fv, spec) = extractor().extract(&frame, None).unwrap();
        assert_eq!(fv.scalar("flux"), 0.0);
        let (same, _) = extractor().extract(&frame, Some(&spec)).unwrap();
        assert_eq!(same.scalar("flux"), 0.0);
    }

    #[test]
    fn single_bin_spectrum() {
        let mut mag = vec![0.0; 256];
        mag[99] = 3.0;
        let s = SpectralShape::of(&mag);
        assert_eq!(s.entropy, 0.0);
        assert_eq!(s.centroid, 100.0 / 256.0);
        assert_eq!(s.spread, 0.0);
        assert_eq!(s.rolloff, 100.0 / 256.0);
        assert_eq!(SpectralShape::of(&[0.0; 8]), SpectralShape { entropy: 0.0, rolloff: 0.0, centroid: 0.0, spread: 0.0 });
        assert_eq!(spectral_flux(&mag, &mag), 0.0);
    }

    #[test]
    fn shannon_helper() {
        assert_eq!(shannon_bits([0.0, 3.0, 0.0].into_iter()), 0.0);
        assert_eq!(shannon_bits([1.0, 1.0].into_iter()), 1.0);
        assert_eq!(shannon_bits([0.0, 0.0].into_iter()), 0.0);
    }

    #[test]
    fn tone_centroid_near_its_bin() {
        // 1000 Hz sits exactly on bin 64; Hann leakage is symmetric about it
        let frame: Vec<f64> = (0..512).map(|i| (2.0 * PI * 1000.0 * i as f64 / 8000.0).sin()).collect();
        let (fv, _) = extractor().extract(&frame, None).unwrap();
        assert!((fv.scalar("centroid") - 64.0 / 256.0).abs() < 1e-9);
        assert!(fv.scalar("spread") < 2.0 / 256.0);
        assert!(fv.scalar("spectral_entropy") < 2.0);
        assert!((fv.scalar("rolloff") - 64.0 / 256.0).abs() <= 1.0 / 256.0);
    }

    #[test]
    fn silent_frame_is_finite() {
        let (fv, _) = extractor().extract(&[0.0; 512], None).unwrap();
        assert!(fv.values.iter().all(|v| v.is_finite()));
        for s in ["spectral_entropy", "centroid", "spread", "rolloff", "entropy", "energy_entropy", "zcr"] {
            assert_eq!(fv.scalar(s), 0.0, "{s}");
        }
    }

    #[test]
    fn frame_length_errors() {
        assert!(extractor().extract(&[], None).is_err());
        assert!(extractor().extract(&[0.0; 513], None).is_err());
        assert!(FeatureExtractor::new(8000, 128).is_err());
    }

    #[test]
    fn mfcc_is_dct_of_mel() {
        let frame: Vec<f64> = (0..512).map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5).collect();
        let (fv, _) = extractor().extract(&frame, None).unwrap();
        let mel = fv.segment("mel_cepstrum_slice");
        let c1: f64 = (0..26)
            .map(|j| (2.0 / 26.0f64).sqrt() * mel[j] * (PI * (j as f64 + 0.5) / 26.0).cos())
            .sum();
        assert!((fv.segment("mfcc")[0] - c1).abs() < 1e-12);
    }

    #[test]
    fn recording_frames_match_stft_grid() {
        let r = Recording::new("r", (0..8000).map(|i| (i as f64 * 0.3).sin()).collect(), 8000).unwrap();
        assert_eq!(extractor().extract_recording(&r).unwrap().len(), 31);
    }

    proptest::proptest! {
        #[test]
        fn finite_on_arbitrary_frames(frame in proptest::collection::vec(-1.0f64..1.0, 1..=512)) {
            let (fv, _) = extractor().extract(&frame, None).unwrap();
            proptest::prop_assert!(fv.values.iter().all(|v| v.is_finite()));
            proptest::prop_assert_eq!(fv.values.len(), FEATURE_DIM);
        }
    }
}
