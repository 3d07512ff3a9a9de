use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Recording;
use crate::error::{Error, Result};

/// Read a PCM or float WAV file as a mono recording in [-1, 1].
///
/// Integer samples are scaled by `1 / 2^(bits-1)`; multichannel audio is
/// averaged to mono. The recording id is the file stem.
pub fn load_wav(path: &Path) -> Result<Recording> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 {
        return Err(Error::Wav(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::Wav(format!(
                    "{}: unsupported float width {}",
                    path.display(),
                    spec.bits_per_sample
                )));
            }
            reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()?
        }
        SampleFormat::Int => {
            let scale = 1.0 / f64::from(1u32 << (spec.bits_per_sample - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    if interleaved.len() < channels {
        return Err(Error::Wav(format!("{}: zero-length audio", path.display())));
    }
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Recording::new(id, mono, spec.sample_rate)
}

/// Write a recording as 16-bit mono PCM. Samples are clipped to [-1, 1].
pub fn write_wav(path: &Path, rec: &Recording) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: rec.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &x in &rec.samples {
        let q = (x.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw<S: hound::Sample + Copy>(path: &Path, spec: WavSpec, samples: &[S]) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn sixteen_bit_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        write_raw(&p, spec, &[0i16, 16384, -16384]);
        let r = load_wav(&p).unwrap();
        assert_eq!(r.samples, vec![0.0, 0.5, -0.5]);
        assert_eq!(r.id, "a");
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = WavSpec { channels: 2, sample_rate: 8000, bits_per_sample: 32, sample_format: SampleFormat::Float };
        write_raw(&p, spec, &[1.0f32, 0.0]);
        assert_eq!(load_wav(&p).unwrap().samples, vec![0.5]);
    }

    #[test]
    fn one_second_header_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        let rec = Recording::new("t", vec![0.25; 8000], 8000).unwrap();
        write_wav(&p, &rec).unwrap();
        let back = load_wav(&p).unwrap();
        assert_eq!(back.len(), 8000);
        assert_eq!(back.sample_rate, 8000);
        assert_eq!(back.samples[0], 0.25);
    }

    #[test]
    fn eight_and_24_bit() {
        let dir = tempfile::tempdir().unwrap();
        let p8 = dir.path().join("b8.wav");
        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 8, sample_format: SampleFormat::Int };
        write_raw(&p8, spec, &[64i8, -128]);
        assert_eq!(load_wav(&p8).unwrap().samples, vec![0.5, -1.0]);

        let p24 = dir.path().join("b24.wav");
        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 24, sample_format: SampleFormat::Int };
        write_raw(&p24, spec, &[1i32 << 22]);
        assert_eq!(load_wav(&p24).unwrap().samples, vec![0.5]);
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_wav(&dir.path().join("missing.wav")).is_err());

        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"not a wav file at all").unwrap();
        assert!(load_wav(&junk).is_err());

        let empty = dir.path().join("empty.wav");
        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        write_raw::<i16>(&empty, spec, &[]);
        assert!(load_wav(&empty).is_err());
    }
}
