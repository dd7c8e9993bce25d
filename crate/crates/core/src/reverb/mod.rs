//! Simulated reverberation: image-method room impulse responses in shoebox
//! rooms, Schroeder-integration RT60 estimates, the randomized room catalog
//! used to build reverberant training sets, and convolutional augmentation.

mod augment;
mod image;
pub mod manifest;
mod rt60;
mod sampling;

pub use augment::{augment, convolve_direct, convolve_truncated};
pub use image::{highpass_100hz, image_method_taps, sabine_absorption, synthesize_rir, SINC_HALF_WIDTH};
pub use manifest::{
    build_augmented_manifest, execute_manifest, Condition, ExecutionSummary, ManifestRow, Utterance,
};
pub use rt60::{rt60_estimate, rt60_from_taps, schroeder_curve_db};
pub use sampling::{sample_room, stream_rng, SamplingProtocol};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_SOUND_SPEED_MPS: f64 = 343.0;

/// Shoebox room, source and microphone placement, and the target RT60.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RoomConfig {
    pub dims_m: [f64; 3],
    pub source_pos_m: [f64; 3],
    pub mic_pos_m: [f64; 3],
    pub target_rt60_s: f64,
    pub sample_rate_hz: u32,
    pub sound_speed_mps: f64,
}

impl RoomConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dims_m.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad(format!("room dimensions must be positive, got {:?}", self.dims_m));
        }
        for (name, p) in [("source", self.source_pos_m), ("mic", self.mic_pos_m)] {
            if p.iter().zip(&self.dims_m).any(|(&x, &d)| !(x > 0.0 && x < d)) {
                return bad(format!("{name} position {p:?} is outside the room {:?}", self.dims_m));
            }
        }
        if !(0.1..=5.0).contains(&self.target_rt60_s) {
            return bad(format!("target RT60 {} s outside [0.1, 5.0]", self.target_rt60_s));
        }
        if self.distance_m() <= 0.0 {
            return bad("source and microphone coincide".into());
        }
        if self.sample_rate_hz == 0 || !(self.sound_speed_mps > 0.0) {
            return bad("sample rate and sound speed must be positive".into());
        }
        Ok(())
    }

    pub fn distance_m(&self) -> f64 {
        self.source_pos_m
            .iter()
            .zip(&self.mic_pos_m)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume_m3(&self) -> f64 {
        self.dims_m.iter().product()
    }

    pub fn surface_m2(&self) -> f64 {
        let [l, w, h] = self.dims_m;
        2.0 * (l * w + l * h + w * h)
    }

    /// `round(fs * d / c)`.
    pub fn direct_delay_samples(&self) -> usize {
        (f64::from(self.sample_rate_hz) * self.distance_m() / self.sound_speed_mps).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RirMeta {
    pub room: RoomConfig,
    /// `None` when the response decays too quickly to reach -35 dB.
    pub achieved_rt60_s: Option<f64>,
    pub direct_delay_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rir<T> {
    pub taps: Vec<T>,
    pub sample_rate_hz: u32,
    pub meta: RirMeta,
}

impl<T: Real> Rir<T> {
    /// A bare impulse response with no room behind it; used by tests and for
    /// measured responses.
    pub fn from_taps(taps: Vec<T>, sample_rate_hz: u32) -> Self {
        let room = RoomConfig {
            dims_m: [1.0; 3],
            source_pos_m: [0.5; 3],
            mic_pos_m: [0.5, 0.5, 0.75],
            target_rt60_s: 0.1,
            sample_rate_hz,
            sound_speed_mps: DEFAULT_SOUND_SPEED_MPS,
        };
        Self {
            taps,
            sample_rate_hz,
            meta: RirMeta {
                room,
                achieved_rt60_s: None,
                direct_delay_samples: 0,
            },
        }
    }

    /// Index of the direct-path arrival: the first local maximum of `|h|`
    /// reaching half the global peak.
    pub fn measured_direct_delay(&self) -> Option<usize> {
        let peak = self.taps.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if peak == T::zero() {
            return None;
        }
        let half = peak * T::lit(0.5);
        let start = self.taps.iter().position(|v| v.abs() >= half)?;
        let mut i = start;
        while i + 1 < self.taps.len() && self.taps[i + 1].abs() > self.taps[i].abs() {
            i += 1;
        }
        Some(i)
    }
}
