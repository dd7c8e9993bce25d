//! RASTA-PLP: Bark-band integration, RASTA band-pass filtering of the log
//! band trajectories, equal-loudness and cube-root compression, then an
//! all-pole fit whose cepstrum is the feature.

use super::mel::{fft_size_for, spectra};
use super::{log_floor, FeatureKind, FeatureMatrix, LOG_FLOOR};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::signal::{AudioBuffer, FrameSpec, PIPELINE_SAMPLE_RATE_HZ};

/// All-pole model order; the cepstrum has `RPLP_ORDER + 1` coefficients.
pub const RPLP_ORDER: usize = 12;

pub fn hz_to_bark(hz: f64) -> f64 {
    6.0 * (hz / 600.0).asinh()
}

pub fn bark_to_hz(bark: f64) -> f64 {
    600.0 * (bark / 6.0).sinh()
}

/// Bark-spaced critical-band weights, one row per band.
struct BarkBank<T> {
    weights: Matrix<T>,
    centers_hz: Vec<f64>,
}

impl<T: Real> BarkBank<T> {
    fn new(fft_size: usize, sample_rate_hz: u32) -> Self {
        let nyq_bark = hz_to_bark(f64::from(sample_rate_hz) / 2.0);
        let bands = nyq_bark.ceil() as usize + 1;
        let step = nyq_bark / (bands - 1) as f64;
        let bins = fft_size / 2 + 1;
        let bin_bark: Vec<f64> = (0..bins)
            .map(|k| hz_to_bark(k as f64 * f64::from(sample_rate_hz) / fft_size as f64))
            .collect();
        let mut weights = Matrix::zeros(bands, bins);
        for b in 0..bands {
            let mid = b as f64 * step;
            for (k, &z) in bin_bark.iter().enumerate() {
                let lo = z - mid - 0.5;
                let hi = z - mid + 0.5;
                let w = 10f64.powf(hi.min(-2.5 * lo).min(0.0));
                weights.set(b, k, T::lit(w));
            }
        }
        Self {
            weights,
            centers_hz: (0..bands).map(|b| bark_to_hz(b as f64 * step)).collect(),
        }
    }

    fn bands(&self) -> usize {
        self.weights.rows()
    }
}

/// Equal-loudness pre-emphasis at `hz`.
fn equal_loudness(hz: f64) -> f64 {
    let fsq = hz * hz;
    let ftmp = fsq + 1.6e5;
    (fsq / ftmp).powi(2) * ((fsq + 1.44e6) / (fsq + 9.61e6))
}

/// RASTA band-pass filter `0.1 (2 + z^-1 - z^-3 - 2 z^-4) / (1 - 0.98 z^-1)`
/// run over one band trajectory with zero initial state.
pub fn rasta_filter<T: Real>(trajectory: &[T]) -> Vec<T> {
    let num = [0.2, 0.1, 0.0, -0.1, -0.2].map(T::lit);
    let pole = T::lit(0.98);
    let mut out = Vec::with_capacity(trajectory.len());
    let mut prev = T::zero();
    for n in 0..trajectory.len() {
        let mut acc = pole * prev;
        for (k, &b) in num.iter().enumerate() {
            if n >= k {
                acc += b * trajectory[n - k];
            }
        }
        out.push(acc);
        prev = acc;
    }
    out
}

/// Autocorrelation of the even, real power spectrum sampled at `spectrum.len()`
/// points on `[0, pi]`, lags `0..=order`.
pub fn autocorrelation_from_spectrum<T: Real>(spectrum: &[T], order: usize) -> Vec<T> {
    let nb = spectrum.len();
    assert!(nb >= 2, "need at least two spectral samples");
    let m = 2 * (nb - 1);
    let last = nb - 1;
    (0..=order)
        .map(|lag| {
            let sign = if lag % 2 == 0 { T::one() } else { -T::one() };
            let mut acc = spectrum[0] + sign * spectrum[last];
            for (j, &v) in spectrum.iter().enumerate().take(last).skip(1) {
                let ph = T::PI() * T::from_usize_lossy(j * lag) / T::from_usize_lossy(last);
                acc += T::lit(2.0) * v * ph.cos();
            }
            acc / T::from_usize_lossy(m)
        })
        .collect()
}

/// Monic all-pole model `E / |1 + sum a_k z^-k|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcModel<T> {
    /// `a_1 ..= a_p`.
    pub coeffs: Vec<T>,
    /// Final prediction-error power.
    pub error: T,
}

/// Levinson-Durbin recursion on autocorrelation lags `r[0..=order]`.
/// Returns `None` when the Toeplitz system is singular (e.g. zero energy).
pub fn levinson_durbin<T: Real>(r: &[T], order: usize) -> Option<LpcModel<T>> {
    assert!(r.len() > order, "need {} lags, got {}", order + 1, r.len());
    let tiny = T::min_positive_value().sqrt();
    if !(r[0] > tiny) {
        return None;
    }
    let mut a = vec![T::zero(); order + 1];
    a[0] = T::one();
    let mut err = r[0];
    for i in 1..=order {
        let mut acc = r[i];
        for j in 1..i {
            acc += a[j] * r[i - j];
        }
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= T::one() - k * k;
        if !(err > T::zero()) || !err.is_finite() {
            return None;
        }
    }
    Some(LpcModel {
        coeffs: a[1..].to_vec(),
        error: err,
    })
}

/// Cepstrum `c_0 ..= c_{n-1}` of the model's power spectrum; `c_0 = ln E`.
pub fn lpc_to_cepstrum<T: Real>(model: &LpcModel<T>, n: usize) -> Vec<T> {
    let p = model.coeffs.len();
    let a = |k: usize| if k >= 1 && k <= p { model.coeffs[k - 1] } else { T::zero() };
    let mut c = vec![T::zero(); n];
    if n == 0 {
        return c;
    }
    c[0] = model.error.ln();
    for m in 1..n {
        let mut acc = a(m);
        for k in 1..m {
            acc += T::from_usize_lossy(k) / T::from_usize_lossy(m) * c[k] * a(m - k);
        }
        c[m] = -acc;
    }
    c
}

/// RASTA-PLP cepstra `c0..c12`.
pub fn extract_rplp<T: Real>(audio: &AudioBuffer<T>, spec: &FrameSpec) -> Result<FeatureMatrix<T>> {
    let spectra = spectra(audio, spec, fft_size_for(spec))?;
    let bank = BarkBank::<T>::new(spectra.fft_size, PIPELINE_SAMPLE_RATE_HZ);
    let frames = spectra.num_frames();
    let nb = bank.bands();
    let floor = T::lit(LOG_FLOOR);

    // log critical-band energies, band-major for the temporal filter
    let mut log_bands = vec![vec![T::zero(); frames]; nb];
    for f in 0..frames {
        let power = spectra.power_rows.row(f);
        for (b, traj) in log_bands.iter_mut().enumerate() {
            let e = bank
                .weights
                .row(b)
                .iter()
                .zip(power)
                .fold(T::zero(), |acc, (&w, &p)| acc + w * p);
            traj[f] = log_floor(e, floor);
        }
    }
    let filtered: Vec<Vec<T>> = log_bands.iter().map(|t| rasta_filter(t)).collect();

    let eql: Vec<T> = bank.centers_hz.iter().map(|&hz| T::lit(equal_loudness(hz))).collect();
    let third = T::lit(1.0 / 3.0);
    let silence = silence_cepstrum::<T>();
    let mut rows = Matrix::zeros(frames, RPLP_ORDER + 1);
    let mut aud = vec![T::zero(); nb];
    for f in 0..frames {
        for b in 0..nb {
            aud[b] = (eql[b] * filtered[b][f].exp()).powf(third);
        }
        // the edge bands sit where the loudness curve is unreliable
        aud[0] = aud[1];
        aud[nb - 1] = aud[nb - 2];
        let r = autocorrelation_from_spectrum(&aud, RPLP_ORDER);
        let cep = match levinson_durbin(&r, RPLP_ORDER) {
            Some(model) => lpc_to_cepstrum(&model, RPLP_ORDER + 1),
            None => silence.clone(),
        };
        rows.row_mut(f).copy_from_slice(&cep);
    }
    Ok(FeatureMatrix::new(rows, FeatureKind::Rplp, *spec, audio.sample_rate_hz()))
}

fn silence_cepstrum<T: Real>() -> Vec<T> {
    let mut c = vec![T::zero(); RPLP_ORDER + 1];
    c[0] = T::lit(LOG_FLOOR).ln();
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::test_signals::{noise, pseudo_speech};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Solve the Toeplitz normal equations by Gaussian elimination.
    fn normal_equations(r: &[f64], p: usize) -> Vec<f64> {
        let mut m: Vec<Vec<f64>> = (0..p)
            .map(|i| {
                let mut row: Vec<f64> = (0..p).map(|j| r[i.abs_diff(j)]).collect();
                row.push(-r[i + 1]);
                row
            })
            .collect();
        for col in 0..p {
            let piv = (col..p).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
            m.swap(col, piv);
            for row in 0..p {
                if row != col {
                    let f = m[row][col] / m[col][col];
                    for k in col..=p {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
        (0..p).map(|i| m[i][p] / m[i][i]).collect()
    }

    fn sample_autocorr(x: &[f64], p: usize) -> Vec<f64> {
        (0..=p).map(|k| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum()).collect()
    }

    #[test]
    fn rasta_removes_constant_offset() {
        let y = rasta_filter(&vec![-23.0f64; 2000]);
        // FIR part vanishes from n = 4 on; the pole then decays geometrically
        for n in 5..2000 {
            assert!((y[n] - 0.98 * y[n - 1]).abs() < 1e-12);
        }
        assert!(y[1999].abs() < 1e-6);
    }

    #[test]
    fn rasta_has_zero_dc_gain() {
        let mut imp = vec![0.0f64; 4000];
        imp[0] = 1.0;
        let h = rasta_filter(&imp);
        assert!(h.iter().sum::<f64>().abs() < 1e-9);
        assert_eq!(&h[..5], &[0.2, 0.98 * 0.2 + 0.1, 0.98 * (0.98 * 0.2 + 0.1), h[2] * 0.98 - 0.1, h[3] * 0.98 - 0.2]);
    }

    #[test]
    fn levinson_matches_direct_solve() {
        let x: Vec<f64> = pseudo_speech(400, 1).samples().to_vec();
        let r = sample_autocorr(&x, RPLP_ORDER);
        let model = levinson_durbin(&r, RPLP_ORDER).unwrap();
        let oracle = normal_equations(&r, RPLP_ORDER);
        for (a, b) in model.coeffs.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let err: f64 = r[0] + model.coeffs.iter().zip(&r[1..]).map(|(a, r)| a * r).sum::<f64>();
        assert!((model.error - err).abs() < 1e-9 * r[0]);
    }

    #[test]
    fn white_noise_model_is_nearly_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..4096).map(|_| rng.random_range(-10.0..10.0)).collect();
        let r = sample_autocorr(&x, RPLP_ORDER);
        for k in 1..=RPLP_ORDER {
            assert!(r[0] > 10.0 * r[k].abs());
        }
        let model = levinson_durbin(&r, RPLP_ORDER).unwrap();
        assert!(model.coeffs.iter().all(|a| a.abs() < 0.1));
        let c = lpc_to_cepstrum(&model, RPLP_ORDER + 1);
        for k in 1..=RPLP_ORDER {
            assert!(c[k].abs() < c[0].abs(), "c{k} = {}", c[k]);
            assert!(c[k].abs() < 0.1);
        }
    }

    #[test]
    fn cepstrum_recursion_matches_log_spectrum_idft() {
        let x: Vec<f64> = pseudo_speech(400, 7).samples().to_vec();
        let model = levinson_durbin(&sample_autocorr(&x, 8), 8).unwrap();
        let c = lpc_to_cepstrum(&model, 13);
        let m = 4096;
        let logspec: Vec<f64> = (0..m)
            .map(|k| {
                let w = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let (mut re, mut im) = (1.0, 0.0);
                for (j, a) in model.coeffs.iter().enumerate() {
                    re += a * (w * (j + 1) as f64).cos();
                    im -= a * (w * (j + 1) as f64).sin();
                }
                model.error.ln() - (re * re + im * im).ln()
            })
            .collect();
        for (n, &cn) in c.iter().enumerate() {
            let idft: f64 = logspec
                .iter()
                .enumerate()
                .map(|(k, &v)| v * (2.0 * std::f64::consts::PI * (k * n) as f64 / m as f64).cos())
                .sum::<f64>()
                / m as f64;
            assert!((cn - idft).abs() < 1e-6, "c{n}: {cn} vs {idft}");
        }
    }

    #[test]
    fn zero_energy_is_singular() {
        assert!(levinson_durbin(&[0.0f64; 13], 12).is_none());
    }

    #[test]
    fn autocorrelation_of_flat_spectrum_is_an_impulse() {
        let r = autocorrelation_from_spectrum(&[2.0f64; 21], 12);
        assert!((r[0] - 2.0).abs() < 1e-12);
        assert!(r[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn single_frame_input() {
        let f = extract_rplp(&noise(400, 2), &FrameSpec::default()).unwrap();
        assert_eq!(f.rows.shape(), (1, 13));
        assert!(f.rows.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn silence_gives_finite_cepstra() {
        let audio = AudioBuffer::new(vec![0.0f64; 3200], 16_000).unwrap();
        let f = extract_rplp(&audio, &FrameSpec::default()).unwrap();
        assert!(f.rows.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn twenty_one_bands_at_16k() {
        let bank = BarkBank::<f64>::new(512, 16_000);
        assert_eq!(bank.bands(), 21);
        assert!((bank.centers_hz[20] - 8000.0).abs() < 1e-6);
    }
}
