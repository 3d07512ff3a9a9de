//! Seeded synthetic corpus: coloured noise (white noise plus a narrowband
//! hum) with intermittent harmonic tones standing in for the target sound.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{LabelTrack, Recording, LABEL_RATE_HZ};
use crate::error::{Error, Result};
use crate::rng;

/// Share of noise power carried by the hum; the rest is white.
const HUM_POWER_FRACTION: f64 = 0.5;
/// Mean length of one tone event.
const MEAN_EVENT_S: f64 = 2.0;
/// Shortest event and shortest gap between events, in label ticks, when
/// the recording is long enough: labels are smooth on the ~1 s scale of
/// human annotation.
const MIN_RUN_TICKS: usize = 10;
/// Peak frequency deviation of the tone.
const JITTER: f64 = 0.03;
/// Raised-cosine onset/offset ramp.
const RAMP_S: f64 = 0.01;
/// Target RMS of the noise floor before any clip guard.
const NOISE_RMS: f64 = 0.02;
const PEAK_LIMIT: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_recordings: usize,
    pub duration_s: f64,
    pub tone_fundamental_hz: f64,
    pub n_harmonics: usize,
    pub harmonic_decay: f64,
    pub snr_db: f64,
    pub noise_hum_hz: f64,
    pub event_duty: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_recordings: 57,
            duration_s: 10.0,
            tone_fundamental_hz: 650.0,
            n_harmonics: 3,
            harmonic_decay: 0.5,
            snr_db: 10.0,
            noise_hum_hz: 300.0,
            event_duty: 0.4,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate) / 2.0;
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if sample_rate == 0 {
            return bad("sample rate must be positive");
        }
        if !(self.event_duty > 0.0 && self.event_duty < 1.0) {
            return bad("event_duty must lie in (0, 1)");
        }
        if !(self.tone_fundamental_hz > 0.0 && self.tone_fundamental_hz < nyquist) {
            return bad("tone_fundamental_hz must lie in (0, sample_rate/2)");
        }
        if !(self.noise_hum_hz > 0.0 && self.noise_hum_hz < nyquist) {
            return bad("noise_hum_hz must lie in (0, sample_rate/2)");
        }
        if self.n_harmonics == 0 {
            return bad("n_harmonics must be at least 1");
        }
        if !(self.harmonic_decay > 0.0 && self.harmonic_decay.is_finite()) {
            return bad("harmonic_decay must be positive");
        }
        if !(self.duration_s * LABEL_RATE_HZ >= 2.0) || !self.duration_s.is_finite() {
            return bad("duration_s must cover at least two label ticks");
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite");
        }
        Ok(())
    }
}

pub(crate) fn recording_seed(root: u64, index: usize) -> u64 {
    rng::derive_seed(root, "synth", index as u64)
}

/// Random composition of `total` into `parts` positive integers.
fn positive_parts(r: &mut rng::Rng, total: usize, parts: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = sample(r, total - 1, parts - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        out.push(c - prev);
        prev = c;
    }
    out
}

/// Random composition of `total` into `parts` non-negative integers.
fn nonneg_parts(r: &mut rng::Rng, total: usize, parts: usize) -> Vec<usize> {
    positive_parts(r, total + parts, parts).into_iter().map(|p| p - 1).collect()
}

/// Label ticks: exactly `round(duty * n)` ones, split into events separated
/// by at least one zero. Events and interior gaps last at least
/// `MIN_RUN_TICKS` where the counts allow it.
fn event_labels(r: &mut rng::Rng, n: usize, duty: f64) -> Vec<u8> {
    let ones = ((duty * n as f64).round() as usize).clamp(1, n - 1);
    let zeros = n - ones;
    let wanted = ((ones as f64 / LABEL_RATE_HZ) / MEAN_EVENT_S).round() as usize;
    let min_len = MIN_RUN_TICKS.min(ones);
    let max_events = (ones / min_len).min(zeros / MIN_RUN_TICKS + 1).max(1);
    let n_events = wanted.clamp(1, max_events);
    let min_gap = if n_events > 1 { MIN_RUN_TICKS.min(zeros / (n_events - 1)) } else { 1 };
    let mut events = positive_parts(r, ones - n_events * (min_len - 1), n_events);
    for e in &mut events {
        *e += min_len - 1;
    }
    let mut gaps = nonneg_parts(r, zeros - (n_events - 1) * min_gap, n_events + 1);
    for g in &mut gaps[1..n_events] {
        *g += min_gap;
    }
    let mut labels = Vec::with_capacity(n);
    for (i, &len) in events.iter().enumerate() {
        labels.extend(std::iter::repeat_n(0u8, gaps[i]));
        labels.extend(std::iter::repeat_n(1u8, len));
    }
    labels.extend(std::iter::repeat_n(0u8, gaps[n_events]));
    labels
}

/// Maximal runs of ones as half-open tick ranges.
fn runs(labels: &[u8]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().chain(std::iter::once(&0)).enumerate() {
        match (l, start) {
            (1, None) => start = Some(i),
            (0, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// One synthetic recording with its 10 Hz label track.
pub fn synth_recording(cfg: &SynthConfig, index: usize, sample_rate: u32) -> Result<(Recording, LabelTrack)> {
    cfg.validate(sample_rate)?;
    let fs = f64::from(sample_rate);
    let mut r = rng::seeded(recording_seed(cfg.seed, index));
    let id = format!("synth_{index:03}");

    let n_ticks = (cfg.duration_s * LABEL_RATE_HZ).round() as usize;
    let n = (cfg.duration_s * fs).round() as usize;
    let labels = event_labels(&mut r, n_ticks, cfg.event_duty);

    // noise floor
    let noise_power = NOISE_RMS * NOISE_RMS;
    let white = Normal::new(0.0, (noise_power * (1.0 - HUM_POWER_FRACTION)).sqrt())
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let hum_amp = (2.0 * noise_power * HUM_POWER_FRACTION).sqrt();
    let hum_phase = r.random::<f64>() * 2.0 * PI;
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            white.sample(&mut r) + hum_amp * (2.0 * PI * cfg.noise_hum_hz * t + hum_phase).sin()
        })
        .collect();

    // tone: harmonic amplitudes decay geometrically, scaled to the requested SNR
    let weights: Vec<f64> = (0..cfg.n_harmonics).map(|h| cfg.harmonic_decay.powi(h as i32)).collect();
    let raw_power: f64 = weights.iter().map(|a| a * a / 2.0).sum();
    let gain = (noise_power * 10f64.powf(cfg.snr_db / 10.0) / raw_power).sqrt();
    let ramp = (RAMP_S * fs).round().max(1.0);

    for (start, end) in runs(&labels) {
        let s0 = ((start as f64 / LABEL_RATE_HZ) * fs).round() as usize;
        let s1 = (((end as f64 / LABEL_RATE_HZ) * fs).round() as usize).min(n);
        let offset: f64 = r.random_range(-0.5..0.5);
        let depth: f64 = r.random_range(0.0..0.5);
        let drift_hz: f64 = r.random_range(0.1..0.5);
        let drift_phase = r.random::<f64>() * 2.0 * PI;
        let mut phases: Vec<f64> = (0..cfg.n_harmonics).map(|_| r.random::<f64>() * 2.0 * PI).collect();
        let len = (s1 - s0) as f64;
        for (j, i) in (s0..s1).enumerate() {
            let t = j as f64 / fs;
            let jitter = JITTER * (offset + depth * (2.0 * PI * drift_hz * t + drift_phase).sin());
            let f0 = cfg.tone_fundamental_hz * (1.0 + jitter);
            let pos = j as f64;
            let env = if pos < ramp {
                0.5 - 0.5 * (PI * pos / ramp).cos()
            } else if len - 1.0 - pos < ramp {
                0.5 - 0.5 * (PI * (len - 1.0 - pos) / ramp).cos()
            } else {
                1.0
            };
            let mut v = 0.0;
            for (h, (w, ph)) in weights.iter().zip(phases.iter_mut()).enumerate() {
                let f = f0 * (h + 1) as f64;
                if f < fs / 2.0 {
                    v += w * ph.sin();
                }
                *ph += 2.0 * PI * f / fs;
            }
            x[i] += gain * env * v;
        }
    }

    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > PEAK_LIMIT {
        let g = PEAK_LIMIT / peak;
        x.iter_mut().for_each(|v| *v *= g);
    }

    Ok((
        Recording::new(id.clone(), x, sample_rate)?,
        LabelTrack::new(id, labels, LABEL_RATE_HZ)?,
    ))
}

/// The full synthetic corpus, one independently seeded stream per recording.
pub fn synth_corpus(cfg: &SynthConfig, sample_rate: u32) -> Result<Vec<(Recording, LabelTrack)>> {
    cfg.validate(sample_rate)?;
    (0..cfg.n_recordings).map(|i| synth_recording(cfg, i, sample_rate)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duty_half_gives_fifty_ones() {
        let cfg = SynthConfig { event_duty: 0.5, n_recordings: 5, ..Default::default() };
        for (_, t) in synth_corpus(&cfg, 8000).unwrap() {
            assert_eq!(t.labels.len(), 100);
            assert!((40..=60).contains(&t.count_ones()), "{}", t.count_ones());
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SynthConfig { n_recordings: 2, seed: 11, ..Default::default() };
        let a = synth_corpus(&cfg, 8000).unwrap();
        let b = synth_corpus(&cfg, 8000).unwrap();
        assert_eq!(a, b);
        let c = synth_corpus(&SynthConfig { seed: 12, ..cfg }, 8000).unwrap();
        assert_ne!(a[0].0.samples, c[0].0.samples);
    }

    #[test]
    fn events_are_separated_runs() {
        let mut r = rng::seeded(3);
        for n in [2usize, 10, 100, 300] {
            for duty in [0.1, 0.4, 0.9] {
                let l = event_labels(&mut r, n, duty);
                assert_eq!(l.len(), n);
                let ones = l.iter().filter(|&&v| v == 1).count();
                assert_eq!(ones, ((duty * n as f64).round() as usize).clamp(1, n - 1));
                let runs = runs(&l);
                if n >= 100 {
                    assert!(runs.iter().all(|(a, b)| b - a >= MIN_RUN_TICKS), "{runs:?}");
                    assert!(runs.windows(2).all(|w| w[1].0 - w[0].1 >= MIN_RUN_TICKS), "{runs:?}");
                }
                assert!(runs.windows(2).all(|w| w[1].0 > w[0].1));
            }
        }
    }

    #[test]
    fn samples_stay_in_range() {
        let cfg = SynthConfig { n_recordings: 3, snr_db: 40.0, ..Default::default() };
        for (rec, _) in synth_corpus(&cfg, 8000).unwrap() {
            assert!(rec.samples.iter().all(|v| v.abs() <= PEAK_LIMIT + 1e-12));
            assert_eq!(rec.len(), 80_000);
        }
    }

    #[test]
    fn config_validation() {
        let bad = SynthConfig { event_duty: 1.0, ..Default::default() };
        assert!(bad.validate(8000).is_err());
        let bad = SynthConfig { tone_fundamental_hz: 4000.0, ..Default::default() };
        assert!(bad.validate(8000).is_err());
    }
}
