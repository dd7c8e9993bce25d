//! Power-normalized cepstral coefficients: gammatone integration,
//! medium-time asymmetric noise suppression with temporal masking, spectral
//! weight smoothing, running mean-power normalization and a 1/15 power law.

use super::mel::{fft_size_for, spectra};
use super::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::signal::{AudioBuffer, FrameSpec, PIPELINE_SAMPLE_RATE_HZ};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PnccConfig {
    pub num_channels: usize,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    /// Half-width of the medium-time averaging window, in frames.
    pub medium_time_half_width: usize,
    pub power_exponent: f64,
    /// Forgetting factor of the running mean power.
    pub mean_power_forgetting: f64,
    /// Initial noise-floor estimate as a fraction of the first frame's power.
    pub ans_init_factor: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_t: f64,
    pub mu_t: f64,
    /// Excitation threshold relative to the lower envelope.
    pub excitation_c: f64,
    /// Half-width of the channel smoothing window.
    pub smoothing_half_width: usize,
    pub num_ceps: usize,
}

impl Default for PnccConfig {
    fn default() -> Self {
        Self {
            num_channels: 40,
            f_low_hz: 200.0,
            f_high_hz: 8000.0,
            medium_time_half_width: 2,
            power_exponent: 1.0 / 15.0,
            mean_power_forgetting: 0.999,
            ans_init_factor: 0.9,
            lambda_a: 0.999,
            lambda_b: 0.5,
            lambda_t: 0.85,
            mu_t: 0.2,
            excitation_c: 2.0,
            smoothing_half_width: 4,
            num_ceps: 13,
        }
    }
}

impl PnccConfig {
    fn validate(&self) -> Result<()> {
        if self.num_channels < 2 || self.num_ceps == 0 || self.num_ceps > self.num_channels {
            return Err(Error::Config(format!(
                "pncc needs 2 <= num_ceps <= num_channels, got {} / {}",
                self.num_ceps, self.num_channels
            )));
        }
        if !(self.f_low_hz > 0.0 && self.f_low_hz < self.f_high_hz) {
            return Err(Error::Config("pncc frequency range is empty".into()));
        }
        Ok(())
    }
}

fn erb_rate(hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * hz).log10()
}

fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

fn erb_bandwidth(hz: f64) -> f64 {
    24.7 * (4.37 * hz / 1000.0 + 1.0)
}

/// `n` centre frequencies equally spaced on the ERB-rate scale, endpoints included.
pub fn erb_space(low_hz: f64, high_hz: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (erb_rate(low_hz), erb_rate(high_hz));
    if n == 1 {
        return vec![erb_rate_to_hz(lo)];
    }
    (0..n)
        .map(|i| erb_rate_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Squared magnitude responses of 4th-order gammatone filters sampled at the FFT bins.
#[derive(Debug, Clone)]
pub struct GammatoneBank<T> {
    pub weights: Matrix<T>,
    pub centers_hz: Vec<f64>,
}

impl<T: Real> GammatoneBank<T> {
    pub fn new(cfg: &PnccConfig, fft_size: usize, sample_rate_hz: u32) -> Self {
        let centers_hz = erb_space(cfg.f_low_hz, cfg.f_high_hz, cfg.num_channels);
        let bins = fft_size / 2 + 1;
        let mut weights = Matrix::zeros(centers_hz.len(), bins);
        for (c, &fc) in centers_hz.iter().enumerate() {
            let b = 1.019 * erb_bandwidth(fc);
            for k in 0..bins {
                let f = k as f64 * f64::from(sample_rate_hz) / fft_size as f64;
                let x = (f - fc) / b;
                weights.set(c, k, T::lit((1.0 + x * x).powi(-4)));
            }
        }
        Self { weights, centers_hz }
    }
}

/// `u^exponent`; 0 maps to 0 and 1 to 1.
#[inline]
pub fn power_law<T: Real>(u: T, exponent: T) -> T {
    u.powf(exponent)
}

/// Orthonormal DCT-II, first `n_out` coefficients.
pub fn dct_ii<T: Real>(x: &[T], n_out: usize) -> Vec<T> {
    let n = x.len();
    let nf = T::from_usize_lossy(n);
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (T::one() / nf).sqrt() } else { (T::lit(2.0) / nf).sqrt() };
            let sum = x.iter().enumerate().fold(T::zero(), |acc, (i, &v)| {
                let ph = T::PI() * T::from_usize_lossy(k * (2 * i + 1)) / (T::lit(2.0) * nf);
                acc + v * ph.cos()
            });
            scale * sum
        })
        .collect()
}

/// First-order smoother whose coefficient depends on whether the input rises
/// above (`lambda_a`) or falls below (`lambda_b`) the current output.
fn asymmetric_filter<T: Real>(input: &[T], lambda_a: T, lambda_b: T, init_factor: T) -> Vec<T> {
    let mut out = Vec::with_capacity(input.len());
    let Some(&first) = input.first() else {
        return out;
    };
    let mut prev = init_factor * first;
    for &x in input {
        let lambda = if x >= prev { lambda_a } else { lambda_b };
        prev = lambda * prev + (T::one() - lambda) * x;
        out.push(prev);
    }
    out
}

/// Noise-suppressed, masked medium-time power for one channel trajectory.
fn suppress_channel<T: Real>(medium: &[T], cfg: &PnccConfig) -> Vec<T> {
    let (la, lb) = (T::lit(cfg.lambda_a), T::lit(cfg.lambda_b));
    let init = T::lit(cfg.ans_init_factor);
    let lower = asymmetric_filter(medium, la, lb, init);
    let rectified: Vec<T> = medium
        .iter()
        .zip(&lower)
        .map(|(&q, &le)| (q - le).max(T::zero()))
        .collect();
    let floor = asymmetric_filter(&rectified, la, lb, init);
    let (lt, mt, c) = (T::lit(cfg.lambda_t), T::lit(cfg.mu_t), T::lit(cfg.excitation_c));
    let mut peak = T::zero();
    let mut out = Vec::with_capacity(medium.len());
    for m in 0..medium.len() {
        let q0 = rectified[m];
        let masked = if q0 >= lt * peak { q0 } else { mt * peak };
        peak = (lt * peak).max(q0);
        let sp = masked.max(floor[m]);
        out.push(if medium[m] >= c * lower[m] { sp } else { floor[m] });
    }
    out
}

pub fn extract_pncc<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec) -> Result<FeatureMatrix<T>> {
    extract_pncc_with(audio, spec, &PnccConfig::default())
}

pub fn extract_pncc_with<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec, cfg: &PnccConfig) -> Result<FeatureMatrix<T>> {
    cfg.validate()?;
    let spectra = spectra(audio, spec, fft_size_for(spec))?;
    let bank = GammatoneBank::<T>::new(cfg, spectra.fft_size, PIPELINE_SAMPLE_RATE_HZ);
    let frames = spectra.num_frames();
    let ch = cfg.num_channels;

    let mut power = Matrix::zeros(frames, ch);
    for f in 0..frames {
        let p = spectra.power_rows.row(f);
        for c in 0..ch {
            let e = bank.weights.row(c).iter().zip(p).fold(T::zero(), |a, (&w, &v)| a + w * v);
            power.set(f, c, e);
        }
    }

    let half = cfg.medium_time_half_width;
    let mut medium = Matrix::zeros(frames, ch);
    for f in 0..frames {
        let lo = f.saturating_sub(half);
        let hi = (f + half + 1).min(frames);
        let count = T::from_usize_lossy(hi - lo);
        for c in 0..ch {
            let s = (lo..hi).fold(T::zero(), |a, m| a + power.get(m, c));
            medium.set(f, c, s / count);
        }
    }

    let mut suppressed = Matrix::zeros(frames, ch);
    let mut traj = vec![T::zero(); frames];
    for c in 0..ch {
        for f in 0..frames {
            traj[f] = medium.get(f, c);
        }
        for (f, v) in suppress_channel(&traj, cfg).into_iter().enumerate() {
            suppressed.set(f, c, v);
        }
    }

    let sw = cfg.smoothing_half_width;
    let lambda_mu = T::lit(cfg.mean_power_forgetting);
    let exponent = T::lit(cfg.power_exponent);
    let mut mean_power = T::zero();
    let mut rows = Matrix::zeros(frames, cfg.num_ceps);
    let mut ratio = vec![T::zero(); ch];
    let mut normalized = vec![T::zero(); ch];
    for f in 0..frames {
        for c in 0..ch {
            let q = medium.get(f, c);
            ratio[c] = if q > T::zero() { suppressed.get(f, c) / q } else { T::zero() };
        }
        let mut frame_mean = T::zero();
        for c in 0..ch {
            let lo = c.saturating_sub(sw);
            let hi = (c + sw + 1).min(ch);
            let weight = ratio[lo..hi].iter().fold(T::zero(), |a, &v| a + v) / T::from_usize_lossy(hi - lo);
            normalized[c] = power.get(f, c) * weight;
            frame_mean += normalized[c];
        }
        frame_mean /= T::from_usize_lossy(ch);
        mean_power = if f == 0 {
            frame_mean
        } else {
            lambda_mu * mean_power + (T::one() - lambda_mu) * frame_mean
        };
        for v in normalized.iter_mut() {
            let u = if mean_power > T::zero() { *v / mean_power } else { T::zero() };
            *v = power_law(u, exponent);
        }
        rows.row_mut(f).copy_from_slice(&dct_ii(&normalized, cfg.num_ceps));
    }
    Ok(FeatureMatrix::new(rows, FeatureKind::Pncc, *spec, audio.sample_rate_hz()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_signals::pseudo_speech;

    #[test]
    fn power_law_fixed_points() {
        let e = 1.0f64 / 15.0;
        assert_eq!(power_law(1.0, e), 1.0);
        assert_eq!(power_law(0.0, e), 0.0);
    }

    #[test]
    fn dct_of_constant() {
        let c = 0.7f64;
        let out = dct_ii(&[c; 40], 13);
        assert!((out[0] - c * 40f64.sqrt()).abs() < 1e-12);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dct_is_orthonormal() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let y = dct_ii(&x, 40);
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ey: f64 = y.iter().map(|v| v * v).sum();
        assert!((ex - ey).abs() < 1e-9 * ex);
    }

    #[test]
    fn erb_centres_span_the_band() {
        let c = erb_space(200.0, 8000.0, 40);
        assert_eq!(c.len(), 40);
        assert!((c[0] - 200.0).abs() < 1e-9 && (c[39] - 8000.0).abs() < 1e-6);
        assert!(c.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn asymmetric_filter_tracks_rises_slowly_and_falls_fast() {
        let up = asymmetric_filter(&[1.0f64, 10.0, 10.0], 0.999, 0.5, 0.9);
        assert!((up[0] - (0.999 * 0.9 + 0.001)).abs() < 1e-12);
        assert!(up[2] < 1.1);
        let down = asymmetric_filter(&[10.0f64, 0.0], 0.999, 0.5, 0.9);
        assert!((down[1] - 0.5 * down[0]).abs() < 1e-12);
    }

    #[test]
    fn gain_invariant() {
        let x = pseudo_speech(32_000, 8);
        let spec = FrameSpec::default();
        let a = extract_pncc(&x, &spec).unwrap();
        for g in [0.5, 2.0, 10.0] {
            let b = extract_pncc(&x.scaled(g), &spec).unwrap();
            for (&va, &vb) in a.rows.as_slice().iter().zip(b.rows.as_slice()) {
                assert!((va - vb).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn silence_is_finite() {
        let audio = AudioBuffer::new(vec![0.0f64; 4000], 16_000).unwrap();
        let f = extract_pncc(&audio, &FrameSpec::default()).unwrap();
        assert!(f.rows.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = PnccConfig { num_ceps: 41, ..PnccConfig::default() };
        let audio = pseudo_speech(4000, 1);
        assert!(extract_pncc_with(&audio, &FrameSpec::default(), &cfg).is_err());
    }
}
