use super::mel::{fft_size_for, log_mel_energies};
use super::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::signal::{AudioBuffer, FrameSpec};

/// Width in bands of the frequency-local normalization window.
pub const DEFAULT_LNFB_WINDOW: usize = 5;

/// Subtract from each band the mean of the `window` bands centred on it.
/// The window is clipped at the spectrum edges.
pub fn local_normalize<T: Real>(bands: &[T], window: usize) -> Result<Vec<T>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Config(format!(
            "normalization window must be a positive odd band count, got {window}"
        )));
    }
    let half = window / 2;
    let n = bands.len();
    Ok((0..n)
        .map(|b| {
            let lo = b.saturating_sub(half);
            let hi = (b + half + 1).min(n);
            let mean = bands[lo..hi].iter().fold(T::zero(), |a, &v| a + v)
                / T::from_usize_lossy(hi - lo);
            bands[b] - mean
        })
        .collect())
}

/// Locally normalized filterbanks with the default 5-band window.
pub fn extract_lnfb<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec) -> Result<FeatureMatrix<T>> {
    extract_lnfb_with(audio, spec, DEFAULT_LNFB_WINDOW)
}

pub fn extract_lnfb_with<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec, window: usize) -> Result<FeatureMatrix<T>> {
    let logmel = log_mel_energies(audio, spec, fft_size_for(spec))?;
    let mut rows = Matrix::zeros(logmel.rows(), logmel.cols());
    for r in 0..logmel.rows() {
        let normed = local_normalize(logmel.row(r), window)?;
        rows.row_mut(r).copy_from_slice(&normed);
    }
    Ok(FeatureMatrix::new(rows, FeatureKind::Lnfb, *spec, audio.sample_rate_hz()))
}
