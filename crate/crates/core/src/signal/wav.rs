//! RIFF/WAVE I/O. Input speech must be 16-bit PCM mono at 16 kHz; RIRs are
//! written as 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioBuffer, PIPELINE_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::scalar::Real;

const PCM16_SCALE: f64 = 32768.0;

/// Read a 16 kHz mono 16-bit PCM WAV file, normalizing samples by 1/32768.
pub fn read_pcm16<T: Real>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::InvalidAudio(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    let reject = |why: String| Error::InvalidAudio(format!("{}: {why}", path.display()));
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(reject(format!(
            "expected 16-bit PCM, found {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.channels != 1 {
        return Err(reject(format!("expected mono, found {} channels", spec.channels)));
    }
    if spec.sample_rate != PIPELINE_SAMPLE_RATE_HZ {
        return Err(reject(format!(
            "expected {PIPELINE_SAMPLE_RATE_HZ} Hz, found {} Hz (no resampling)",
            spec.sample_rate
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| T::lit(f64::from(v) / PCM16_SCALE)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Write 16-bit PCM; samples are clipped to the representable range.
pub fn write_pcm16<T: Real>(path: impl AsRef<Path>, audio: &AudioBuffer<T>) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec)?;
    for &s in audio.samples() {
        let v = (s.as_f64() * PCM16_SCALE).round().clamp(-32768.0, 32767.0);
        w.write_sample(v as i16)?;
    }
    w.finalize()?;
    Ok(())
}

/// Write mono 32-bit float samples.
pub fn write_f32<T: Real>(path: impl AsRef<Path>, samples: &[T], sample_rate_hz: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample(s.as_f64() as f32)?;
    }
    w.finalize()?;
    Ok(())
}

/// Read a mono 32-bit float WAV (the RIR format).
pub fn read_f32<T: Real>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>> {
    let path = path.as_ref();
    let reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Float || spec.bits_per_sample != 32 || spec.channels != 1 {
        return Err(Error::InvalidAudio(format!(
            "{}: expected mono 32-bit float",
            path.display()
        )));
    }
    let samples = reader
        .into_samples::<f32>()
        .map(|s| s.map(|v| T::lit(f64::from(v))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    AudioBuffer::new(samples, spec.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, rate: u32, bits: u16, fmt: SampleFormat) {
        let spec = WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: bits,
            sample_format: fmt,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for i in 0..(64 * channels as i32) {
            match fmt {
                SampleFormat::Int if bits == 16 => w.write_sample(i as i16).unwrap(),
                SampleFormat::Int => w.write_sample(i).unwrap(),
                SampleFormat::Float => w.write_sample(i as f32).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_round_trip_normalizes_by_32768() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let audio = AudioBuffer::new(vec![0.5f64, -1.0, 0.25, 32767.0 / 32768.0], 16_000).unwrap();
        write_pcm16(&p, &audio).unwrap();
        let back: AudioBuffer<f64> = read_pcm16(&p).unwrap();
        assert_eq!(back.samples(), audio.samples());
    }

    #[test]
    fn rejects_other_encodings() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("stereo", 2, 16_000, 16, SampleFormat::Int, "mono"),
            ("rate", 1, 8_000, 16, SampleFormat::Int, "8000 Hz"),
            ("bits", 1, 16_000, 24, SampleFormat::Int, "16-bit"),
            ("float", 1, 16_000, 32, SampleFormat::Float, "16-bit"),
        ];
        for (name, ch, rate, bits, fmt, needle) in cases {
            let p = dir.path().join(format!("{name}.wav"));
            write_raw(&p, ch, rate, bits, fmt);
            let err = read_pcm16::<f64>(&p).unwrap_err().to_string();
            assert!(err.contains(needle), "{name}: {err}");
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_pcm16::<f32>("/nonexistent/x.wav").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
