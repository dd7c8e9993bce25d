use super::Rir;
use crate::error::{Error, Result};
use crate::scalar::Real;

const FIT_START_DB: f64 = -5.0;
const FIT_END_DB: f64 = -35.0;

/// Schroeder energy decay curve in dB relative to total energy. Entries
/// after the last nonzero tap are `-inf`.
pub fn schroeder_curve_db<T: Real>(taps: &[T]) -> Vec<f64> {
    let mut edc = vec![0.0f64; taps.len()];
    let mut acc = 0.0f64;
    for (i, &v) in taps.iter().enumerate().rev() {
        let e = v.as_f64();
        acc += e * e;
        edc[i] = acc;
    }
    let total = acc;
    edc.iter()
        .map(|&e| if total > 0.0 { 10.0 * (e / total).log10() } else { f64::NEG_INFINITY })
        .collect()
}

/// T30-based RT60: least-squares line through the decay curve between -5
/// and -35 dB, extrapolated to 60 dB.
pub fn rt60_from_taps<T: Real>(taps: &[T], sample_rate_hz: u32) -> Result<f64> {
    let curve = schroeder_curve_db(taps);
    let reached = curve
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !reached.is_finite() {
        return Err(Error::EmptyInput("impulse response has no energy".into()));
    }
    if reached > FIT_END_DB {
        return Err(Error::InsufficientDecay { reached_db: reached });
    }
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &db) in curve.iter().enumerate() {
        if db <= FIT_START_DB && db >= FIT_END_DB {
            let x = i as f64;
            n += 1.0;
            sx += x;
            sy += db;
            sxx += x * x;
            sxy += x * db;
        }
    }
    let denom = n * sxx - sx * sx;
    if n < 2.0 || denom <= 0.0 {
        return Err(Error::InsufficientDecay { reached_db: reached });
    }
    let slope = (n * sxy - sx * sy) / denom;
    if slope >= 0.0 {
        return Err(Error::InsufficientDecay { reached_db: reached });
    }
    Ok(-60.0 / slope / f64::from(sample_rate_hz))
}

pub fn rt60_estimate<T: Real>(rir: &Rir<T>) -> Result<f64> {
    rt60_from_taps(&rir.taps, rir.sample_rate_hz)
}
