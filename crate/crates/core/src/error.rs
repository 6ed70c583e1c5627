use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index {index} is out of vocabulary (size {vocab})")]
    OutOfVocabulary { index: usize, vocab: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("expected a scalar, got shape {0:?}")]
    NonScalar(Vec<usize>),

    #[error("missing required columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("invalid trend spec: {0}")]
    TrendSpec(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("sales target is constant on the training rows")]
    DegenerateTarget,

    #[error("feature `{0}` is constant on the training rows")]
    ConstantFeature(String),

    #[error("training window spans a single day")]
    DegenerateWindow,

    #[error("predictions are constant; linear fit is undefined")]
    DegenerateFit,

    #[error("unknown store `{0}`")]
    UnknownStore(String),

    #[error("training diverged at epoch {epoch}: mean train loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint incompatible: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// Process exit status for the command-line front end:
    /// 1 config error, 2 data error, 3 training divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::TrendSpec(_) | Error::Config(_) => 1,
            Error::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
