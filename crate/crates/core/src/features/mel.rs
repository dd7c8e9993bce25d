use super::{log_floor, FeatureKind, FeatureMatrix, LOG_FLOOR};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::signal::{self, AudioBuffer, FrameSpec, SpectralFrameSet, PIPELINE_SAMPLE_RATE_HZ};

pub const NUM_MEL_FILTERS: usize = 40;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale, applied to one-sided
/// power spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    pub num_filters: usize,
    /// `num_filters x num_bins`.
    pub weights: Matrix<T>,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    centers_hz: Vec<f64>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn new(num_filters: usize, fft_size: usize, sample_rate_hz: u32, f_low_hz: f64, f_high_hz: f64) -> Self {
        let num_bins = fft_size / 2 + 1;
        let (lo, hi) = (hz_to_mel(f_low_hz), hz_to_mel(f_high_hz));
        let edges: Vec<f64> = (0..num_filters + 2)
            .map(|i| lo + (hi - lo) * i as f64 / (num_filters + 1) as f64)
            .collect();
        let bin_mel: Vec<f64> = (0..num_bins)
            .map(|k| hz_to_mel(k as f64 * f64::from(sample_rate_hz) / fft_size as f64))
            .collect();
        let mut weights = Matrix::zeros(num_filters, num_bins);
        for f in 0..num_filters {
            let (l, c, r) = (edges[f], edges[f + 1], edges[f + 2]);
            for (k, &m) in bin_mel.iter().enumerate() {
                let w = if m > l && m <= c {
                    (m - l) / (c - l)
                } else if m > c && m < r {
                    (r - m) / (r - c)
                } else {
                    0.0
                };
                weights.set(f, k, T::lit(w));
            }
        }
        Self {
            num_filters,
            weights,
            f_low_hz,
            f_high_hz,
            centers_hz: edges[1..=num_filters].iter().map(|&m| mel_to_hz(m)).collect(),
        }
    }

    /// 40 filters spanning 0 Hz to Nyquist for 16 kHz audio.
    pub fn standard(fft_size: usize) -> Self {
        Self::new(NUM_MEL_FILTERS, fft_size, PIPELINE_SAMPLE_RATE_HZ, 0.0, 8000.0)
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn num_bins(&self) -> usize {
        self.weights.cols()
    }

    /// Filter energies for one power-spectrum row.
    pub fn apply_row(&self, power: &[T], out: &mut [T]) {
        for (f, dst) in out.iter_mut().enumerate() {
            *dst = self
                .weights
                .row(f)
                .iter()
                .zip(power)
                .fold(T::zero(), |acc, (&w, &p)| acc + w * p);
        }
    }

    /// Filter energies for every frame.
    pub fn apply(&self, spectra: &SpectralFrameSet<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(spectra.num_frames(), self.num_filters);
        for r in 0..spectra.num_frames() {
            self.apply_row(spectra.power_rows.row(r), out.row_mut(r));
        }
        out
    }
}

/// Power spectra of `audio` with the default FFT size.
pub(crate) fn spectra<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec, fft_size: usize) -> Result<SpectralFrameSet<T>> {
    audio.require_rate(PIPELINE_SAMPLE_RATE_HZ)?;
    let frames = signal::frame_signal(audio, spec)?;
    signal::power_spectrum(&frames, fft_size)
}

pub(crate) fn log_mel_energies<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec, fft_size: usize) -> Result<Matrix<T>> {
    let spectra = spectra(audio, spec, fft_size)?;
    let bank = MelFilterbank::<T>::standard(fft_size);
    let floor = T::lit(LOG_FLOOR);
    Ok(bank.apply(&spectra).map(|e| log_floor(e, floor)))
}

/// Log mel filterbank energies, 40 per frame.
pub fn extract_melfb<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec) -> Result<FeatureMatrix<T>> {
    let rows = log_mel_energies(audio, spec, fft_size_for(spec))?;
    Ok(FeatureMatrix::new(rows, FeatureKind::Melfb, *spec, audio.sample_rate_hz()))
}

/// Next power of two at or above the window length (512 for 400 samples).
pub(crate) fn fft_size_for(spec: &FrameSpec) -> usize {
    spec.window_len_samples.next_power_of_two()
}
