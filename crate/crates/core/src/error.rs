use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input too short: {got} samples, need at least {required}")]
    InputTooShort { got: usize, required: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid audio: {0}")]
    InvalidAudio(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("infeasible RT for geometry: target {rt60_s:.3} s needs absorption {alpha:.3} > 1")]
    InfeasibleRt { rt60_s: f64, alpha: f64 },

    #[error("insufficient decay range: energy decay curve only reaches {reached_db:.1} dB, need -35 dB")]
    InsufficientDecay { reached_db: f64 },

    #[error("room sampling failed: {0}")]
    Sampling(String),

    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("scores unavailable: {0}")]
    ScoresUnavailable(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tag `self` with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
