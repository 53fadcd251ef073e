use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate series: `{ticker}` has zero variance in the estimation window")]
    DegenerateSeries { ticker: String },

    #[error(
        "embedding fidelity: centered matrix has eigenvalue {eigenvalue:e} \
         below the clamping floor (largest eigenvalue {largest:e})"
    )]
    EmbeddingFidelity { eigenvalue: f64, largest: f64 },

    #[error("mass error: {0}")]
    Mass(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("degenerate asset: asset #{asset} sits on the center of mass")]
    DegenerateAsset { asset: usize },

    #[error("accounting error: {0}")]
    Accounting(String),

    #[error("frontier error: {0}")]
    Frontier(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's settings rather than by the data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
