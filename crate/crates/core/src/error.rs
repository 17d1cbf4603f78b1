use thiserror::Error;

/// Errors surfaced by the block-solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("block index {index} out of range for {blocks} blocks")]
    BlockIndexOutOfRange { index: usize, blocks: usize },

    #[error("vector length {len} does not match partition total {total}")]
    LengthMismatch { len: usize, total: usize },

    #[error("invalid stepsize {0}; stepsizes must be positive")]
    InvalidStepsize(f64),

    #[error("invalid probability {0}; block probabilities must lie in (0, 1]")]
    InvalidProbability(f64),

    #[error("invalid sampling distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("output averaging weight {weight} at t={t} is negative; schedule is inadmissible")]
    NegativeOutputWeight { t: usize, weight: f64 },

    #[error("output averaging weights are all zero")]
    ZeroWeightSum,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed instance file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
