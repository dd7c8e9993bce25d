use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FrameSpec, Frames};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Next power of two above the default 400-sample window.
pub const DEFAULT_FFT_SIZE: usize = 512;

/// One-sided power spectra, `fft_size / 2 + 1` bins per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrameSet<T> {
    pub power_rows: Matrix<T>,
    pub fft_size: usize,
    pub frame_spec: FrameSpec,
}

impl<T: Real> SpectralFrameSet<T> {
    pub fn num_frames(&self) -> usize {
        self.power_rows.rows()
    }

    pub fn num_bins(&self) -> usize {
        self.power_rows.cols()
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize, sample_rate_hz: u32) -> f64 {
        k as f64 * f64::from(sample_rate_hz) / self.fft_size as f64
    }
}

/// `|DFT(frame)|^2` for bins `0..=fft_size/2`, each frame zero-padded to `fft_size`.
pub fn power_spectrum<T: Real>(frames: &Frames<T>, fft_size: usize) -> Result<SpectralFrameSet<T>> {
    let win = frames.spec.window_len_samples;
    if !fft_size.is_power_of_two() {
        return Err(Error::Config(format!("fft size {fft_size} is not a power of two")));
    }
    if fft_size < win {
        return Err(Error::Config(format!(
            "fft size {fft_size} is smaller than the {win}-sample window"
        )));
    }
    let bins = fft_size / 2 + 1;
    let fft = FftPlanner::<T>::new().plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_size];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    let mut power_rows = Matrix::zeros(frames.len(), bins);
    for (r, frame) in frames.data.iter_rows().enumerate() {
        for (dst, &x) in buf.iter_mut().zip(frame) {
            *dst = Complex::new(x, T::zero());
        }
        for dst in &mut buf[frame.len()..] {
            *dst = Complex::new(T::zero(), T::zero());
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (dst, c) in power_rows.row_mut(r).iter_mut().zip(&buf[..bins]) {
            *dst = c.norm_sqr();
        }
    }
    Ok(SpectralFrameSet {
        power_rows,
        fft_size,
        frame_spec: frames.spec,
    })
}
