use thiserror::Error;

pub type Result<T> = std::result::Result<T, CovaError>;

#[derive(Debug, Error)]
pub enum CovaError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("index {index} out of range 0..{len}")]
    Bounds { index: usize, len: usize },

    #[error("parse error at frame {frame}: {msg}")]
    Parse { frame: usize, msg: String },

    #[error("parse error in header: {0}")]
    Header(String),

    #[error("stream structure error: {0}")]
    Structure(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("sequencing error: frame {got} after frame {last}")]
    Sequencing { last: usize, got: usize },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("chunk {chunk} failed near frame {frame}: {msg}")]
    Chunk { chunk: usize, frame: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CovaError {
    /// True for errors caused by bad user-supplied configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, CovaError::Config(_))
    }
}
