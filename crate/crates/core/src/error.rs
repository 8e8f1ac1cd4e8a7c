use thiserror::Error;

/// Errors produced anywhere in the waveform design pipeline.
#[derive(Debug, Error)]
pub enum DripError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid config field `{field}`: {msg}")]
    Invalid { field: String, msg: String },

    #[error("unsupported constellation `{0}`")]
    UnsupportedConstellation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("channel is rank deficient (condition number {0:.3e})")]
    RankDeficient(f64),

    #[error("interference-plus-noise matrix is numerically singular (condition number {0:.3e})")]
    SingularInterference(f64),

    #[error("beamformer is degenerate (zero SINR denominator)")]
    DegenerateBeamformer,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("PAPR of the zero vector is undefined")]
    ZeroVector,

    #[error("real vector of odd length {0} has no complex counterpart")]
    OddLength(usize),

    #[error("campaign: {0}")]
    Campaign(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DripError {
    pub(crate) fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Self {
        DripError::Invalid {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by a bad configuration rather than IO or numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            DripError::Parse { .. }
                | DripError::Invalid { .. }
                | DripError::UnsupportedConstellation(_)
                | DripError::Campaign(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, DripError>;
