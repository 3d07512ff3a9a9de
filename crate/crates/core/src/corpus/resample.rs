use std::f64::consts::PI;

use super::Recording;
use crate::error::{Error, Result};

/// Zero crossings of the sinc kernel kept on each side of the centre tap.
const HALF_ZEROS: f64 = 24.0;
/// Pass-band edge as a fraction of the lower Nyquist rate.
const ROLLOFF: f64 = 0.95;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(u: f64) -> f64 {
    // u in [-1, 1]
    let t = PI * (u + 1.0);
    0.42 - 0.5 * t.cos() + 0.08 * (2.0 * t).cos()
}

/// Band-limited (windowed-sinc) sample-rate conversion.
///
/// Content above `min(source, target) / 2` is filtered out. The output has
/// `round(n * target / source)` samples, so its duration is within one
/// output sample period of the input's.
pub fn resample(r: &Recording, target_rate: u32) -> Result<Recording> {
    if target_rate == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    if target_rate == r.sample_rate {
        return Ok(r.clone());
    }
    let ratio = f64::from(target_rate) / f64::from(r.sample_rate);
    let n_in = r.samples.len();
    let n_out = ((n_in as f64) * ratio).round().max(1.0) as usize;

    // cutoff in cycles per input sample, relative to the input Nyquist
    let cutoff = ROLLOFF * ratio.min(1.0);
    let half_width = HALF_ZEROS / cutoff;

    let samples = (0..n_out)
        .map(|m| {
            let t = m as f64 / ratio;
            let lo = (t - half_width).ceil().max(0.0) as usize;
            let hi = ((t + half_width).floor() as usize).min(n_in - 1);
            (lo..=hi)
                .map(|n| {
                    let d = t - n as f64;
                    r.samples[n] * cutoff * sinc(cutoff * d) * blackman(d / half_width)
                })
                .sum()
        })
        .collect();
    Recording::new(r.id.clone(), samples, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize) -> Recording {
        let s = (0..n).map(|i| (2.0 * PI * freq * i as f64 / f64::from(rate)).sin() * 0.5).collect();
        Recording::new("tone", s, rate).unwrap()
    }

    #[test]
    fn identity_rate() {
        let r = tone(440.0, 8000, 100);
        assert_eq!(resample(&r, 8000).unwrap(), r);
    }

    #[test]
    fn halving_length() {
        let r = tone(1000.0, 16000, 16000);
        let out = resample(&r, 8000).unwrap();
        assert_eq!(out.len(), 8000);
        assert_eq!(out.sample_rate, 8000);
        assert!((out.duration_s() - r.duration_s()).abs() <= 1.0 / 8000.0);
    }

    #[test]
    fn removes_content_above_new_nyquist() {
        // 6 kHz at 16 kHz cannot survive conversion to 8 kHz
        let r = tone(6000.0, 16000, 16000);
        let out = resample(&r, 8000).unwrap();
        let interior = &out.samples[200..7800];
        let rms = (interior.iter().map(|x| x * x).sum::<f64>() / interior.len() as f64).sqrt();
        assert!(rms < 1e-3, "rms {rms}");
    }

    #[test]
    fn preserves_in_band_amplitude() {
        let r = tone(1000.0, 16000, 16000);
        let out = resample(&r, 8000).unwrap();
        let interior = &out.samples[200..7800];
        let rms = (interior.iter().map(|x| x * x).sum::<f64>() / interior.len() as f64).sqrt();
        assert!((rms - 0.5 / 2f64.sqrt()).abs() < 5e-3, "rms {rms}");
    }

    #[test]
    fn rejects_zero_rate() {
        assert!(resample(&tone(1.0, 8000, 10), 0).is_err());
    }
}
