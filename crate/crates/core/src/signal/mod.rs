//! Waveform container, framing and short-time power spectra shared by every
//! feature extractor.

mod spectrum;
pub mod wav;

pub use spectrum::{power_spectrum, SpectralFrameSet, DEFAULT_FFT_SIZE};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Sample rate every feature pipeline expects.
pub const PIPELINE_SAMPLE_RATE_HZ: u32 = 16_000;

/// Mono waveform, linear amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    samples: Vec<T>,
    sample_rate_hz: u32,
}

impl<T: Real> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidAudio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Multiply every sample by `gain`.
    pub fn scaled(&self, gain: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub(crate) fn require_rate(&self, rate: u32) -> Result<()> {
        if self.sample_rate_hz != rate {
            return Err(Error::InvalidAudio(format!(
                "sample rate {} Hz, expected {rate} Hz",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hamming,
}

impl WindowKind {
    /// Symmetric window of length `len`.
    pub fn coefficients<T: Real>(self, len: usize) -> Vec<T> {
        match self {
            WindowKind::Hamming => hamming(len),
        }
    }
}

/// Symmetric Hamming window, `0.54 - 0.46 cos(2 pi k / (L - 1))`.
pub fn hamming<T: Real>(len: usize) -> Vec<T> {
    if len == 1 {
        return vec![T::one()];
    }
    let denom = T::from_usize_lossy(len - 1);
    (0..len)
        .map(|k| {
            let phase = T::TAU() * T::from_usize_lossy(k) / denom;
            T::lit(0.54) - T::lit(0.46) * phase.cos()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FrameSpec {
    pub window_len_samples: usize,
    pub hop_samples: usize,
    pub window_kind: WindowKind,
}

impl Default for FrameSpec {
    /// 25 ms windows every 10 ms at 16 kHz.
    fn default() -> Self {
        Self {
            window_len_samples: 400,
            hop_samples: 160,
            window_kind: WindowKind::Hamming,
        }
    }
}

impl FrameSpec {
    pub fn new(window_len_samples: usize, hop_samples: usize) -> Result<Self> {
        let spec = Self {
            window_len_samples,
            hop_samples,
            window_kind: WindowKind::Hamming,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len_samples == 0 || self.hop_samples == 0 {
            return Err(Error::Config(
                "window length and hop must be positive".into(),
            ));
        }
        if self.hop_samples > self.window_len_samples {
            return Err(Error::Config(format!(
                "hop {} exceeds window length {}",
                self.hop_samples, self.window_len_samples
            )));
        }
        Ok(())
    }

    /// Number of whole frames that fit in `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.window_len_samples {
            0
        } else {
            (len - self.window_len_samples) / self.hop_samples + 1
        }
    }

    pub fn hop_ms(&self, sample_rate_hz: u32) -> f64 {
        1000.0 * self.hop_samples as f64 / f64::from(sample_rate_hz)
    }
}

/// Windowed analysis frames, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames<T> {
    pub data: Matrix<T>,
    pub spec: FrameSpec,
}

impl<T: Real> Frames<T> {
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }
}

/// Cut `audio` into overlapping windowed frames. Frame `i` covers samples
/// `[i * hop, i * hop + window_len)`; trailing samples that do not fill a
/// whole window are dropped.
pub fn frame_signal<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec) -> Result<Frames<T>> {
    spec.validate()?;
    let len = spec.window_len_samples;
    if audio.len() < len {
        return Err(Error::InputTooShort {
            got: audio.len(),
            required: len,
        });
    }
    let count = spec.frame_count(audio.len());
    let window: Vec<T> = spec.window_kind.coefficients(len);
    let mut data = Matrix::zeros(count, len);
    for i in 0..count {
        let start = i * spec.hop_samples;
        let src = &audio.samples()[start..start + len];
        for ((dst, &x), &w) in data.row_mut(i).iter_mut().zip(src).zip(&window) {
            *dst = x * w;
        }
    }
    Ok(Frames { data, spec: *spec })
}
