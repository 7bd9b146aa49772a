use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid formation: {0}")]
    Formation(String),

    #[error("formation file {path}: {message}")]
    FormationSchema { path: String, message: String },

    #[error("index {index} out of range for {n} agents")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("episode {episode} diverged at t = {time:.6} s: {detail}")]
    Diverged { episode: usize, time: f64, detail: String },

    #[error("no samples left after discarding the first {burn_in} s")]
    EmptyAfterBurnIn { burn_in: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
