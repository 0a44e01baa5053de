use thiserror::Error;

use crate::autodiff::AutodiffError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error("schema: {0}")]
    Schema(String),

    #[error("row {row}, column '{column}': {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("degenerate direction: {0}")]
    Degenerate(String),

    #[error("consistency audit failed: {0}")]
    Audit(String),

    #[error("unsupported bundle version '{0}'")]
    BundleVersion(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
