use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("failed to load network: {0}")]
    Load(String),

    #[error("failed to load network: layer {layer}: {message}")]
    LayerLoad { layer: usize, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("non-finite generator output while differentiating column {column}")]
    NonFiniteColumn { column: usize },

    #[error("non-finite generator output")]
    NonFiniteOutput,

    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,

    #[error("degenerate point: no singular value survives the rank threshold")]
    DegeneratePoint,

    #[error("direction {index} is degenerate (rank {rank}); pass allow_degenerate to use it")]
    DegenerateDirection { index: usize, rank: usize },

    #[error("direction {index} out of range: only {available} singular directions")]
    DirectionOutOfRange { index: usize, available: usize },

    #[error("every sample of the profile is degenerate")]
    EmptyProfile,

    #[error("score undefined: {0}")]
    ScoreUndefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
