use super::{Rir, RirMeta, RoomConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fractional delays are rendered with `2 * SINC_HALF_WIDTH + 1` Hann-windowed sinc taps.
pub const SINC_HALF_WIDTH: usize = 40;

/// Uniform absorption coefficient from Sabine's formula, `RT60 = 0.161 V / (alpha S)`.
pub fn sabine_absorption(cfg: &RoomConfig) -> f64 {
    0.161 * cfg.volume_m3() / (cfg.target_rt60_s * cfg.surface_m2())
}

/// Visit every image source within `max_dist` of the microphone, passing
/// its distance and reflection count.
fn for_each_image(cfg: &RoomConfig, max_dist: f64, mut visit: impl FnMut(f64, i32)) {
    let max_dist_sq = max_dist * max_dist;
    let span: Vec<i64> = cfg
        .dims_m
        .iter()
        .map(|&l| (max_dist / (2.0 * l)).ceil() as i64 + 1)
        .collect();
    let [sx, sy, sz] = cfg.source_pos_m;
    let [rx, ry, rz] = cfg.mic_pos_m;
    let [lx, ly, lz] = cfg.dims_m;

    for q in 0..2i64 {
        let qs = (1 - 2 * q) as f64;
        for nx in -span[0]..=span[0] {
            let dx = qs * sx + 2.0 * nx as f64 * lx - rx;
            let refl_x = (2 * nx - q).unsigned_abs() as i32;
            if dx * dx > max_dist_sq {
                continue;
            }
            for j in 0..2i64 {
                let js = (1 - 2 * j) as f64;
                for ny in -span[1]..=span[1] {
                    let dy = js * sy + 2.0 * ny as f64 * ly - ry;
                    let dxy = dx * dx + dy * dy;
                    if dxy > max_dist_sq {
                        continue;
                    }
                    let refl_xy = refl_x + (2 * ny - j).unsigned_abs() as i32;
                    for k in 0..2i64 {
                        let ks = (1 - 2 * k) as f64;
                        for nz in -span[2]..=span[2] {
                            let dz = ks * sz + 2.0 * nz as f64 * lz - rz;
                            let d2 = dxy + dz * dz;
                            if d2 > max_dist_sq {
                                continue;
                            }
                            visit(d2.sqrt(), refl_xy + (2 * nz - k).unsigned_abs() as i32);
                        }
                    }
                }
            }
        }
    }
}

/// Image-method response of length `len` for a room with uniform pressure
/// reflection coefficient `beta` on all six walls.
pub fn image_method_taps<T: Real>(cfg: &RoomConfig, beta: f64, len: usize) -> Vec<T> {
    let fs = f64::from(cfg.sample_rate_hz);
    let c = cfg.sound_speed_mps;
    let mut taps = vec![T::zero(); len];
    if len == 0 {
        return taps;
    }
    let half = SINC_HALF_WIDTH as f64;
    let max_dist = (len as f64 + half + 1.0) * c / fs;
    let window_width = half + 1.0;
    let scale = 1.0 / (4.0 * std::f64::consts::PI);
    for_each_image(cfg, max_dist, |d, refl| {
        let amp = beta.powi(refl) * scale / d;
        if amp != 0.0 {
            add_fractional_impulse(&mut taps, d * fs / c, amp, window_width);
        }
    });
    taps
}

/// Second-order high-pass at 100 Hz, applied in place. Image sources all
/// arrive with positive sign, so without it the response carries a slowly
/// decaying low-frequency offset that stretches the measured decay.
pub fn highpass_100hz(taps: &mut [f64], sample_rate_hz: u32) {
    let w = 2.0 * std::f64::consts::PI * 100.0 / f64::from(sample_rate_hz);
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let (mut y0, mut y1) = (0.0, 0.0);
    for tap in taps.iter_mut() {
        let y2 = y1;
        y1 = y0;
        y0 = b1 * y1 + b2 * y2 + *tap;
        *tap = y0 + a1 * y1 + r1 * y2;
    }
}

/// Accumulate `amp * w(t - delay) * sinc(t - delay)` over the taps within
/// the window support.
fn add_fractional_impulse<T: Real>(taps: &mut [T], delay: f64, amp: f64, window_width: f64) {
    let half = SINC_HALF_WIDTH as f64;
    let first = (delay - half).ceil().max(0.0) as usize;
    let last = (delay + half).floor();
    if last < 0.0 {
        return;
    }
    let last = (last as usize).min(taps.len() - 1);
    if first > last {
        return;
    }
    let pi = std::f64::consts::PI;
    let x0 = first as f64 - delay;
    // sin(pi (x0 + i)) alternates sign; the Hann cosine advances by a fixed rotation
    let s0 = (pi * x0).sin();
    let step = pi / window_width;
    let (sin_step, cos_step) = step.sin_cos();
    let (mut wsin, mut wcos) = (step * x0).sin_cos();
    let mut sign = 1.0;
    for (i, tap) in taps[first..=last].iter_mut().enumerate() {
        let x = x0 + i as f64;
        let sinc = if x.abs() < 1e-9 { 1.0 } else { sign * s0 / (pi * x) };
        let w = 0.5 * (1.0 + wcos);
        *tap += T::lit(amp * w * sinc);
        sign = -sign;
        let c = wcos * cos_step - wsin * sin_step;
        wsin = wsin * cos_step + wcos * sin_step;
        wcos = c;
    }
}

/// Synthesize the impulse response for `cfg`. Absorption comes from the
/// inverted Sabine formula, the image sum is high-passed at 100 Hz, and the
/// response spans 1.25 x the target RT60.
pub fn synthesize_rir<T: Real>(cfg: &RoomConfig) -> Result<Rir<T>> {
    cfg.validate()?;
    let alpha = sabine_absorption(cfg);
    if alpha > 1.0 + 1e-9 {
        return Err(Error::InfeasibleRt {
            rt60_s: cfg.target_rt60_s,
            alpha,
        });
    }
    let beta = (1.0 - alpha.min(1.0)).sqrt();
    let len = (1.25 * cfg.target_rt60_s * f64::from(cfg.sample_rate_hz)).ceil() as usize;
    let mut raw = image_method_taps::<f64>(cfg, beta, len);
    highpass_100hz(&mut raw, cfg.sample_rate_hz);
    let taps: Vec<T> = raw.into_iter().map(T::lit).collect();
    let achieved = super::rt60_from_taps(&taps, cfg.sample_rate_hz).ok();
    Ok(Rir {
        taps,
        sample_rate_hz: cfg.sample_rate_hz,
        meta: RirMeta {
            room: cfg.clone(),
            achieved_rt60_s: achieved,
            direct_delay_samples: cfg.direct_delay_samples(),
        },
    })
}
