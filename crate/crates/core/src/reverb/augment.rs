use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Rir;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::AudioBuffer;

const PEAK_TARGET: f64 = 0.95;
/// Above this many multiply-adds the FFT path is used.
const DIRECT_LIMIT: usize = 1 << 16;

/// Textbook O(n m) full convolution.
pub fn convolve_direct<T: Real>(x: &[T], h: &[T]) -> Vec<T> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![T::zero(); x.len() + h.len() - 1];
    for (i, &xv) in x.iter().enumerate() {
        for (j, &hv) in h.iter().enumerate() {
            y[i + j] += xv * hv;
        }
    }
    y
}

/// First `x.len()` samples of the full linear convolution `x * h`.
pub fn convolve_truncated<T: Real>(x: &[T], h: &[T]) -> Vec<T> {
    let n = x.len();
    if n == 0 || h.is_empty() {
        return vec![T::zero(); n];
    }
    // samples beyond n cannot reach the output
    let h = &h[..h.len().min(n)];
    if n.saturating_mul(h.len()) <= DIRECT_LIMIT {
        let mut y = convolve_direct(x, h);
        y.truncate(n);
        return y;
    }
    let size = (n + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |s: &[T]| {
        let mut v = vec![Complex::new(T::zero(), T::zero()); size];
        for (d, &v0) in v.iter_mut().zip(s) {
            d.re = v0;
        }
        v
    };
    let mut a = pad(x);
    let mut b = pad(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= *q;
    }
    inv.process(&mut a);
    let norm = T::from_usize_lossy(size);
    a[..n].iter().map(|c| c.re / norm).collect()
}

/// Reverberate `audio` with `rir`, keeping the original length. The result
/// is rescaled to a 0.95 peak only if it would otherwise exceed 1.0.
pub fn augment<T: Real>(audio: &AudioBuffer<T>, rir: &Rir<T>) -> Result<AudioBuffer<T>> {
    if audio.sample_rate_hz() != rir.sample_rate_hz {
        return Err(Error::InvalidAudio(format!(
            "sample-rate mismatch: audio {} Hz, RIR {} Hz",
            audio.sample_rate_hz(),
            rir.sample_rate_hz
        )));
    }
    let mut y = convolve_truncated(audio.samples(), &rir.taps);
    let peak = y.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if peak > T::one() {
        let g = T::lit(PEAK_TARGET) / peak;
        y.iter_mut().for_each(|v| *v *= g);
    }
    AudioBuffer::new(y, audio.sample_rate_hz())
}
