use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unsupported constellation '{0}' (supported: qam4)")]
    UnsupportedConstellation(String),

    #[error("pulse-overlap condition violated for user {user}: tau = {tau} must be < Ts/P = {limit}")]
    PulseOverlap { user: usize, tau: f64, limit: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("need at least {required} snapshots for fourth-order statistics, got {n}")]
    InsufficientSamples { n: usize, required: usize },

    #[error("insufficient excitation: sample covariance has rank {rank} < {k}")]
    InsufficientExcitation { rank: usize, k: usize },

    #[error("matrix is rank deficient ({0})")]
    RankDeficient(&'static str),

    #[error("phase undefined at ({row},{col})")]
    PhaseUndefined { row: usize, col: usize },

    #[error("slope unidentifiable with P = {0} < 2 rows")]
    SlopeUnidentifiable(usize),

    #[error("index {index} out of range for {len} users")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("covariance is not positive definite (noise variance must be > 0)")]
    NotPositiveDefinite,

    #[error("nuisance FIM singular")]
    NuisanceSingular,

    #[error("config error: {0}")]
    Config(String),

    #[error("empty sweep")]
    EmptySweep,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn mismatch(
    context: &'static str,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
