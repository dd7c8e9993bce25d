//! Front ends, reverberant data simulation and system combination for
//! far-field speech recognition experiments.
//!
//! - [`signal`]: framing, windowing, power spectra, WAV I/O
//! - [`features`]: log mel filterbanks, RASTA-PLP, locally normalized filterbanks, PNCC
//! - [`reverb`]: image-method room impulse responses, RT60 estimation, randomized room catalogs, augmentation
//! - [`fusion`]: weighted score fusion across acoustic models, ROVER voting, and the two in cascade
//! - [`eval`]: word error rate and table aggregation
//! - [`pipeline`]: batch orchestration used by the `revfuse` CLI
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the precision for callers that do not care.

pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
mod matrix;
pub mod pipeline;
pub mod reverb;
mod scalar;
pub mod signal;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Real;

pub type AudioBuffer = signal::AudioBuffer<f64>;
pub type AudioBufferF32 = signal::AudioBuffer<f32>;
pub type FeatureMatrix = features::FeatureMatrix<f64>;
pub type FeatureMatrixF32 = features::FeatureMatrix<f32>;
pub type ScoreMatrix = fusion::ScoreMatrix<f64>;
pub type ScoreMatrixF32 = fusion::ScoreMatrix<f32>;
pub type FusionWeights = fusion::FusionWeights<f64>;
pub type Rir = reverb::Rir<f64>;
pub type RirF32 = reverb::Rir<f32>;

/// Toolkit version recorded in run logs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
