use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{log_floor, TimeFrequencyImage, TransformKind};
use crate::corpus::Recording;
use crate::error::{Error, Result};

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Frame-level STFT machinery shared by the spectrogram and the feature
/// extractor: a `2·h1`-sample Hann window and a `2·h1`-point FFT.
pub struct FrameTransform {
    h1: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FrameTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameTransform").field("h1", &self.h1).finish()
    }
}

impl FrameTransform {
    pub fn new(h1: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * h1);
        Self { h1, window: hann(2 * h1), fft }
    }

    pub fn window_len(&self) -> usize {
        2 * self.h1
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Full two-sided spectrum of one windowed frame. `frame` may be shorter
    /// than the window; it is zero-padded.
    pub fn spectrum(&self, frame: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = self
            .window
            .iter()
            .enumerate()
            .map(|(i, w)| Complex::new(frame.get(i).copied().unwrap_or(0.0) * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf
    }

    /// Magnitudes of bins `1..=h1` (DC dropped, Nyquist kept).
    pub fn magnitudes(&self, frame: &[f64]) -> Vec<f64> {
        self.spectrum(frame)[1..=self.h1].iter().map(|c| c.norm()).collect()
    }
}

/// Number of STFT columns for `n` samples: `floor(n / h1)`.
pub fn stft_columns(n: usize, h1: usize) -> usize {
    n / h1
}

/// Frame `t` of a recording: samples `[t·h1, t·h1 + 2·h1)`, zero past the end.
pub fn frame_at(samples: &[f64], h1: usize, t: usize) -> &[f64] {
    let start = (t * h1).min(samples.len());
    let end = (start + 2 * h1).min(samples.len());
    &samples[start..end]
}

/// Log-magnitude STFT with `h1` rows at `fs / h1` frames per second.
///
/// Hann window of `2·h1` samples, hop `h1`; bins `k = 1..=h1` at
/// `k·fs/(2·h1)` Hz. The tail is zero-padded by one hop so the column count
/// is `floor(n / h1)`, matching the scalogram grid.
pub fn stft_spectrogram(r: &Recording, h1: usize) -> Result<TimeFrequencyImage> {
    if h1 == 0 {
        return Err(Error::invalid("h1 must be positive"));
    }
    if r.len() < 2 * h1 {
        return Err(Error::invalid(format!(
            "{}: {} samples is shorter than the {}-sample window",
            r.id,
            r.len(),
            2 * h1
        )));
    }
    let ft = FrameTransform::new(h1);
    let t_cols = stft_columns(r.len(), h1);
    let mut values = ndarray::Array2::<f64>::zeros((h1, t_cols));
    for t in 0..t_cols {
        for (k, m) in ft.magnitudes(frame_at(&r.samples, h1, t)).into_iter().enumerate() {
            values[[k, t]] = log_floor(m);
        }
    }
    let fs = f64::from(r.sample_rate);
    Ok(TimeFrequencyImage {
        values,
        freq_axis: (1..=h1).map(|k| k as f64 * fs / (2 * h1) as f64).collect(),
        frame_rate: fs / h1 as f64,
        kind: TransformKind::Stft,
    })
}
