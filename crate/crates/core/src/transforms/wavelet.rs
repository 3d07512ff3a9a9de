use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{log_floor, TimeFrequencyImage, TransformKind};
use crate::corpus::Recording;
use crate::error::{Error, Result};

pub const DEFAULT_MU: f64 = 5.0;
pub const DEFAULT_SIGMA: f64 = 0.6;
pub const DEFAULT_F_MIN: f64 = 20.0;
pub const DEFAULT_F_MAX: f64 = 4000.0;

/// Bump wavelet in the Fourier domain at scaled frequency `x = s·ω`.
///
/// `exp(1 - 1/(1 - u²))` with `u = (x - mu)/sigma` on `|u| < 1`, zero elsewhere.
pub fn bump_wavelet_fourier(x: f64, mu: f64, sigma: f64) -> f64 {
    let u = (x - mu) / sigma;
    let u2 = u * u;
    if u2 < 1.0 {
        (1.0 - 1.0 / (1.0 - u2)).exp()
    } else {
        0.0
    }
}

/// Scales for a bump-wavelet scalogram, ordered by ascending centre frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletBank {
    pub mu: f64,
    pub sigma: f64,
    pub sample_rate: f64,
    pub scales: Vec<f64>,
    pub center_freqs: Vec<f64>,
}

impl WaveletBank {
    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

/// Centre frequency in Hz of scale `s`: `mu · fs / (2π s)`.
pub fn center_frequency(mu: f64, scale: f64, sample_rate: f64) -> f64 {
    mu * sample_rate / (2.0 * PI * scale)
}

/// `h1` log-spaced scales whose centre frequencies run from `f_min` to `f_max`
/// inclusive.
pub fn scales_for_band(h1: usize, f_min: f64, f_max: f64, mu: f64, sigma: f64, sample_rate: f64) -> Result<WaveletBank> {
    if h1 == 0 {
        return Err(Error::invalid("wavelet bank needs at least one scale"));
    }
    if !(f_min > 0.0 && f_min < f_max && f_max <= sample_rate / 2.0) {
        return Err(Error::invalid(format!(
            "invalid band [{f_min}, {f_max}] Hz at {sample_rate} Hz"
        )));
    }
    if !(mu > sigma && sigma > 0.0) {
        return Err(Error::invalid(format!("bump wavelet needs mu > sigma > 0 (mu={mu}, sigma={sigma})")));
    }
    let ratio = f_max / f_min;
    let center_freqs: Vec<f64> = (0..h1)
        .map(|i| {
            if i == 0 {
                f_min
            } else if i == h1 - 1 {
                f_max
            } else {
                f_min * ratio.powf(i as f64 / (h1 - 1) as f64)
            }
        })
        .collect();
    let scales = center_freqs.iter().map(|&f| mu * sample_rate / (2.0 * PI * f)).collect();
    Ok(WaveletBank { mu, sigma, sample_rate, scales, center_freqs })
}

/// Bump-wavelet scalogram on the `fs / h1` frame grid.
///
/// For each scale the coefficients are `ifft(fft(x) · Ψ(s·ω))` over the
/// angular grid `ω_k = 2πk/N`. Magnitudes are mean-pooled over blocks of
/// `h1` samples (trailing partial block dropped) and mapped through
/// `ln(1e-10 + ·)`. `h1` is the number of scales in the bank.
pub fn cwt_scalogram(r: &Recording, bank: &WaveletBank) -> Result<TimeFrequencyImage> {
    let h1 = bank.len();
    let n = r.len();
    if h1 == 0 {
        return Err(Error::invalid("empty wavelet bank"));
    }
    if n < h1 {
        return Err(Error::invalid(format!(
            "{}: {n} samples is shorter than one {h1}-sample frame",
            r.id
        )));
    }
    if (f64::from(r.sample_rate) - bank.sample_rate).abs() > 0.0 {
        return Err(Error::invalid(format!(
            "{}: recording at {} Hz but wavelet bank built for {} Hz",
            r.id, r.sample_rate, bank.sample_rate
        )));
    }
    let t_cols = n / h1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut spectrum: Vec<Complex<f64>> = r.samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fwd.process(&mut spectrum);

    let mut values = ndarray::Array2::<f64>::zeros((h1, t_cols));
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); inv.get_inplace_scratch_len()];
    let d_omega = 2.0 * PI / n as f64;
    let inv_n = 1.0 / n as f64;

    for (row, &s) in bank.scales.iter().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        // nonzero only where (mu - sigma)/s < ω < (mu + sigma)/s
        let lo = (((bank.mu - bank.sigma) / s) / d_omega).floor().max(0.0) as usize;
        let hi = ((((bank.mu + bank.sigma) / s) / d_omega).ceil() as usize).min(n - 1);
        for k in lo..=hi {
            let psi = bump_wavelet_fourier(s * k as f64 * d_omega, bank.mu, bank.sigma);
            buf[k] = spectrum[k] * psi;
        }
        inv.process_with_scratch(&mut buf, &mut scratch);
        for t in 0..t_cols {
            let block = &buf[t * h1..(t + 1) * h1];
            let mean = block.iter().map(|c| c.norm()).sum::<f64>() * inv_n / h1 as f64;
            values[[row, t]] = log_floor(mean);
        }
    }

    Ok(TimeFrequencyImage {
        values,
        freq_axis: bank.center_freqs.clone(),
        frame_rate: bank.sample_rate / h1 as f64,
        kind: TransformKind::Cwt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64, n: usize) -> Recording {
        let s = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / 8000.0).sin()).collect();
        Recording::new("tone", s, 8000).unwrap()
    }

    #[test]
    fn bump_closed_forms() {
        let (mu, sigma) = (5.0, 0.6);
        assert_eq!(bump_wavelet_fourier(mu, mu, sigma), 1.0);
        assert_eq!(bump_wavelet_fourier(mu + 2.0 * sigma, mu, sigma), 0.0);
        assert_eq!(bump_wavelet_fourier(mu + sigma, mu, sigma), 0.0);
        let v = bump_wavelet_fourier(mu + sigma / 2f64.sqrt(), mu, sigma);
        assert!((v - (-1f64).exp()).abs() < 1e-12, "{v}");
        // continuous at the support edge
        assert!(bump_wavelet_fourier(mu + sigma * (1.0 - 1e-6), mu, sigma) < 1e-100);
    }

    #[test]
    fn center_frequency_formula() {
        let f = center_frequency(5.0, 10.0, 8000.0);
        assert!((f - 636.619_772_367_581_4).abs() < 1e-9, "{f}");
    }

    #[test]
    fn band_endpoints_and_log_spacing() {
        let b = scales_for_band(2, 100.0, 400.0, 5.0, 0.6, 8000.0).unwrap();
        assert_eq!(b.center_freqs, vec![100.0, 400.0]);

        let b = scales_for_band(256, 20.0, 4000.0, 5.0, 0.6, 8000.0).unwrap();
        let r0 = b.center_freqs[1] / b.center_freqs[0];
        for w in b.center_freqs.windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-9);
        }
        for (f, s) in b.center_freqs.iter().zip(&b.scales) {
            assert!((center_frequency(5.0, *s, 8000.0) - f).abs() < 1e-9 * f);
        }
        assert!(b.scales.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn invalid_bands() {
        assert!(scales_for_band(4, 0.0, 100.0, 5.0, 0.6, 8000.0).is_err());
        assert!(scales_for_band(4, 200.0, 100.0, 5.0, 0.6, 8000.0).is_err());
        assert!(scales_for_band(4, 20.0, 4001.0, 5.0, 0.6, 8000.0).is_err());
        assert!(scales_for_band(4, 20.0, 400.0, 0.5, 0.6, 8000.0).is_err());
    }

    #[test]
    fn column_count() {
        let bank = scales_for_band(256, 20.0, 4000.0, 5.0, 0.6, 8000.0).unwrap();
        let img = cwt_scalogram(&tone(650.0, 0.5, 12_000), &bank).unwrap();
        assert_eq!(img.values.dim(), (256, 46));
        assert_eq!(img.frame_rate, 31.25);
    }

    #[test]
    fn zero_signal_is_log_floor() {
        let bank = scales_for_band(16, 20.0, 4000.0, 5.0, 0.6, 8000.0).unwrap();
        let r = Recording::new("z", vec![0.0; 64], 8000).unwrap();
        let img = cwt_scalogram(&r, &bank).unwrap();
        assert!(img.values.iter().all(|&v| v == 1e-10f64.ln()));
    }

    #[test]
    fn too_short() {
        let bank = scales_for_band(16, 20.0, 4000.0, 5.0, 0.6, 8000.0).unwrap();
        let r = Recording::new("z", vec![0.0; 15], 8000).unwrap();
        assert!(cwt_scalogram(&r, &bank).is_err());
    }

    #[test]
    fn doubling_amplitude_shifts_by_ln2() {
        let bank = scales_for_band(64, 100.0, 2000.0, 5.0, 0.6, 8000.0).unwrap();
        let a = cwt_scalogram(&tone(650.0, 0.25, 4096), &bank).unwrap();
        let b = cwt_scalogram(&tone(650.0, 0.5, 4096), &bank).unwrap();
        // rows near the tone, where |coef| >> the log floor
        let row = bank.center_freqs.iter().position(|&f| f >= 650.0).unwrap();
        for r in row - 2..row + 2 {
            for t in 0..a.values.ncols() {
                let d = b.values[[r, t]] - a.values[[r, t]];
                assert!((d - 2f64.ln()).abs() < 1e-6, "row {r} col {t}: {d}");
            }
        }
    }
}
