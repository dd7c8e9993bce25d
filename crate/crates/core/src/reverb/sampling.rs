use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RoomConfig, DEFAULT_SOUND_SPEED_MPS};
use crate::error::{Error, Result};
use crate::signal::PIPELINE_SAMPLE_RATE_HZ;

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Randomized room catalog: jittered shoebox dimensions, uniform RT60, and
/// source/mic placements kept away from the walls.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SamplingProtocol {
    pub rt_range_s: (f64, f64),
    pub nominal_dims_m: [f64; 3],
    /// Relative half-width of the uniform dimension jitter.
    pub dim_jitter: f64,
    pub distance_range_m: (f64, f64),
    pub wall_margin_m: f64,
    pub height_range_m: (f64, f64),
    pub rirs_per_utterance: usize,
    pub catalog_size: usize,
    pub seed: u64,
    pub sample_rate_hz: u32,
    pub sound_speed_mps: f64,
}

impl Default for SamplingProtocol {
    fn default() -> Self {
        Self {
            rt_range_s: (0.4, 1.99),
            nominal_dims_m: [7.95, 5.68, 4.5],
            dim_jitter: 0.2,
            distance_range_m: (0.144, 2.816),
            wall_margin_m: 1.0,
            height_range_m: (1.0, 2.0),
            rirs_per_utterance: 3,
            catalog_size: 30_000,
            seed: 0,
            sample_rate_hz: PIPELINE_SAMPLE_RATE_HZ,
            sound_speed_mps: DEFAULT_SOUND_SPEED_MPS,
        }
    }
}

impl SamplingProtocol {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && 0.0 < a && a <= b;
        if !ordered(self.rt_range_s) || !ordered(self.distance_range_m) || !ordered(self.height_range_m) {
            return Err(Error::Config("protocol ranges must be positive and ordered".into()));
        }
        if !(0.0..1.0).contains(&self.dim_jitter) || self.catalog_size == 0 || self.rirs_per_utterance == 0 {
            return Err(Error::Config("invalid jitter, catalog size or RIR count".into()));
        }
        Ok(())
    }
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Counter-based generator for `(seed, index, purpose)`: the key is built from
/// the seed and purpose tag and the index selects the ChaCha stream, so any
/// catalog entry can be regenerated without replaying earlier draws.
pub fn stream_rng(seed: u64, index: u64, purpose: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(purpose).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

/// Draw catalog entry `index`. Fully determined by `(protocol.seed, index)`.
pub fn sample_room(protocol: &SamplingProtocol, index: usize) -> Result<RoomConfig> {
    protocol.validate()?;
    if index >= protocol.catalog_size {
        return Err(Error::Config(format!(
            "room index {index} outside catalog of {}",
            protocol.catalog_size
        )));
    }
    let mut rng = stream_rng(protocol.seed, index as u64, "room");
    let j = protocol.dim_jitter;
    let dims = protocol.nominal_dims_m.map(|d| uniform(&mut rng, (d * (1.0 - j), d * (1.0 + j))));
    let rt = uniform(&mut rng, protocol.rt_range_s);

    let m = protocol.wall_margin_m;
    let z_range = (protocol.height_range_m.0.max(m), protocol.height_range_m.1.min(dims[2] - m));
    let allowed = [(m, dims[0] - m), (m, dims[1] - m), z_range];
    if allowed.iter().any(|&(lo, hi)| lo > hi) {
        return Err(Error::Sampling(format!(
            "room {dims:?} leaves no placement region with {m} m wall margin"
        )));
    }
    let inside = |p: &[f64; 3]| p.iter().zip(&allowed).all(|(&x, &(lo, hi))| x >= lo && x <= hi);
    let source = allowed.map(|r| uniform(&mut rng, r));

    let mut last_distance = 0.0;
    for _ in 0..2 {
        let distance = uniform(&mut rng, protocol.distance_range_m);
        last_distance = distance;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let u = unit_vector(&mut rng);
            let mic = [0, 1, 2].map(|a| source[a] + distance * u[a]);
            if inside(&mic) {
                return Ok(RoomConfig {
                    dims_m: dims,
                    source_pos_m: source,
                    mic_pos_m: mic,
                    target_rt60_s: rt,
                    sample_rate_hz: protocol.sample_rate_hz,
                    sound_speed_mps: protocol.sound_speed_mps,
                });
            }
        }
    }
    Err(Error::Sampling(format!(
        "no mic placement at {last_distance:.3} m from source {source:?} in room {dims:?} (index {index})"
    )))
}
