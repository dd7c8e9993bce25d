//! System combination at two levels: weighted log-likelihood fusion of
//! per-frame acoustic scores, and ROVER word voting over decoded hypotheses.
//! [`cascade_combine`] chains the two.

mod decode;
pub mod io;
mod rover;

pub use decode::{greedy_decode, LabelMap, Word, WordHypothesis, DEFAULT_SILENCE_TOKEN};
pub use rover::{rover_combine, rover_combine_with, RoverParams};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Per-frame, per-state log-likelihood scores from one system.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    pub system_id: String,
    /// `frames x states`.
    pub scores: Matrix<T>,
}

impl<T: Real> ScoreMatrix<T> {
    pub fn new(system_id: impl Into<String>, scores: Matrix<T>) -> Result<Self> {
        let system_id = system_id.into();
        if let Some(i) = scores.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!(
                "system '{system_id}': non-finite score at frame {}, state {}",
                i / scores.cols().max(1),
                i % scores.cols().max(1)
            )));
        }
        Ok(Self { system_id, scores })
    }

    pub fn num_frames(&self) -> usize {
        self.scores.rows()
    }

    pub fn num_states(&self) -> usize {
        self.scores.cols()
    }
}

/// Combination weights `w[r, s, n]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionWeights<T> {
    /// Every weight is `1 / systems`.
    Uniform { systems: usize },
    /// One weight per system.
    PerSystem(Vec<T>),
    /// One `frames x states` weight matrix per system.
    PerStateFrame(Vec<Matrix<T>>),
}

impl<T: Real> FusionWeights<T> {
    pub fn num_systems(&self) -> usize {
        match self {
            FusionWeights::Uniform { systems } => *systems,
            FusionWeights::PerSystem(w) => w.len(),
            FusionWeights::PerStateFrame(w) => w.len(),
        }
    }

    /// Effective weight of system `r` at state `s`, frame `n`.
    pub fn weight(&self, r: usize, s: usize, n: usize) -> T {
        match self {
            FusionWeights::Uniform { systems } => T::one() / T::from_usize_lossy(*systems),
            FusionWeights::PerSystem(w) => w[r],
            FusionWeights::PerStateFrame(w) => w[r].get(n, s),
        }
    }

    fn validate(&self, systems: usize, frames: usize, states: usize) -> Result<()> {
        if self.num_systems() != systems {
            return Err(Error::Dimension(format!(
                "{} weights for {systems} systems",
                self.num_systems()
            )));
        }
        match self {
            FusionWeights::Uniform { .. } => {}
            FusionWeights::PerSystem(w) => {
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("non-finite fusion weight".into()));
                }
            }
            FusionWeights::PerStateFrame(w) => {
                for (r, m) in w.iter().enumerate() {
                    if m.shape() != (frames, states) {
                        return Err(Error::Dimension(format!(
                            "weights for system {r} are {:?}, scores are {:?}",
                            m.shape(),
                            (frames, states)
                        )));
                    }
                    if m.as_slice().iter().any(|v| !v.is_finite()) {
                        return Err(Error::Config(format!("non-finite fusion weight for system {r}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Uniform weights `1 / systems`.
pub fn uniform_weights<T: Real>(systems: usize) -> Result<FusionWeights<T>> {
    if systems == 0 {
        return Err(Error::EmptyInput("uniform weights need at least one system".into()));
    }
    Ok(FusionWeights::Uniform { systems })
}

/// `fused(s, n) = sum_r w[r, s, n] * m_r(s, n)`. No renormalization is applied.
pub fn fuse_scores<T: Real>(systems: &[ScoreMatrix<T>], weights: &FusionWeights<T>) -> Result<ScoreMatrix<T>> {
    let first = systems
        .first()
        .ok_or_else(|| Error::EmptyInput("no score matrices to fuse".into()))?;
    let (frames, states) = first.scores.shape();
    for (r, sys) in systems.iter().enumerate().skip(1) {
        if sys.scores.shape() != (frames, states) {
            return Err(Error::Dimension(format!(
                "system {r} ('{}') is {}x{}, expected {frames}x{states} like '{}'",
                sys.system_id,
                sys.num_frames(),
                sys.num_states(),
                first.system_id
            )));
        }
    }
    weights.validate(systems.len(), frames, states)?;
    let mut out = Matrix::zeros(frames, states);
    for (r, sys) in systems.iter().enumerate() {
        match weights {
            FusionWeights::PerStateFrame(w) => {
                for ((o, &m), &wv) in out.as_mut_slice().iter_mut().zip(sys.scores.as_slice()).zip(w[r].as_slice()) {
                    *o += wv * m;
                }
            }
            _ => {
                let w = weights.weight(r, 0, 0);
                for (o, &m) in out.as_mut_slice().iter_mut().zip(sys.scores.as_slice()) {
                    *o += w * m;
                }
            }
        }
    }
    ScoreMatrix::new("fused", out)
}

/// Fuse with uniform weights, decode the result and every individual
/// system, then vote over the `R + 1` hypotheses with the fused decode first.
pub fn cascade_combine<T: Real>(
    systems: &[ScoreMatrix<T>],
    labels: &LabelMap,
    hop_ms: f64,
    alpha: f64,
) -> Result<WordHypothesis> {
    let weights = uniform_weights(systems.len())?;
    let params = RoverParams { alpha, ..RoverParams::default() };
    cascade_combine_with(systems, &weights, labels, hop_ms, &params)
}

pub fn cascade_combine_with<T: Real>(
    systems: &[ScoreMatrix<T>],
    weights: &FusionWeights<T>,
    labels: &LabelMap,
    hop_ms: f64,
    params: &RoverParams,
) -> Result<WordHypothesis> {
    let fused = fuse_scores(systems, weights)?;
    let mut voters = Vec::with_capacity(systems.len() + 1);
    voters.push(greedy_decode(&fused, labels, hop_ms)?);
    for sys in systems {
        voters.push(greedy_decode(sys, labels, hop_ms)?);
    }
    let mut out = rover_combine_with(&voters, params)?;
    out.system_id = "cascade".into();
    Ok(out)
}
