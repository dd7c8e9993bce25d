//! The four front ends: log mel filterbanks, RASTA-PLP cepstra, locally
//! normalized filterbanks and power-normalized cepstral coefficients.

pub mod io;
mod lnfb;
mod mel;
mod pncc;
mod rplp;

pub use lnfb::{extract_lnfb, extract_lnfb_with, local_normalize, DEFAULT_LNFB_WINDOW};
pub use mel::{extract_melfb, hz_to_mel, mel_to_hz, MelFilterbank, NUM_MEL_FILTERS};
pub use pncc::{
    dct_ii, erb_space, extract_pncc, extract_pncc_with, power_law, GammatoneBank, PnccConfig,
};
pub use rplp::{
    autocorrelation_from_spectrum, bark_to_hz, extract_rplp, hz_to_bark, levinson_durbin,
    lpc_to_cepstrum, rasta_filter, LpcModel, RPLP_ORDER,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;
use crate::signal::{AudioBuffer, FrameSpec};

/// Floor applied before every logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

#[inline]
pub(crate) fn log_floor<T: Real>(x: T, floor: T) -> T {
    x.max(floor).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Melfb,
    Rplp,
    Lnfb,
    Pncc,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [
        FeatureKind::Melfb,
        FeatureKind::Rplp,
        FeatureKind::Lnfb,
        FeatureKind::Pncc,
    ];

    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Melfb | FeatureKind::Lnfb => 40,
            FeatureKind::Rplp | FeatureKind::Pncc => 13,
        }
    }

    /// Kind byte in the RFE1 header.
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Melfb => 1,
            FeatureKind::Rplp => 2,
            FeatureKind::Lnfb => 3,
            FeatureKind::Pncc => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Melfb => "melfb",
            FeatureKind::Rplp => "rplp",
            FeatureKind::Lnfb => "lnfb",
            FeatureKind::Pncc => "pncc",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown feature kind '{s}'")))
    }
}

/// Frames x dims feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub rows: Matrix<T>,
    pub kind: FeatureKind,
    pub frame_spec: FrameSpec,
    pub sample_rate_hz: u32,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(rows: Matrix<T>, kind: FeatureKind, frame_spec: FrameSpec, sample_rate_hz: u32) -> Self {
        debug_assert_eq!(rows.cols(), kind.dim());
        debug_assert!(rows.as_slice().iter().all(|v| v.is_finite()));
        Self {
            rows,
            kind,
            frame_spec,
            sample_rate_hz,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.rows.rows()
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }
}

/// Knobs shared by the extractors. Defaults reproduce the plain `extract_*` functions.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub lnfb_window: usize,
    pub pncc: PnccConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            lnfb_window: DEFAULT_LNFB_WINDOW,
            pncc: PnccConfig::default(),
        }
    }
}

/// Run the extractor for `kind`.
pub fn extract<T: Real>(
    kind: FeatureKind,
    audio: &AudioBuffer<T>,
    spec: &FrameSpec,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix<T>> {
    match kind {
        FeatureKind::Melfb => extract_melfb(audio, spec),
        FeatureKind::Rplp => extract_rplp(audio, spec),
        FeatureKind::Lnfb => extract_lnfb_with(audio, spec, cfg.lnfb_window),
        FeatureKind::Pncc => extract_pncc_with(audio, spec, &cfg.pncc),
    }
}
