use dear_service::ApiError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing files, unreadable configuration.
    #[error("{0}")]
    Usage(String),

    /// The request makes no sense for this instance.
    #[error("{0}")]
    Precondition(String),

    /// Port busy, socket errors.
    #[error("{0}")]
    Environment(String),

    /// A search that ran but found nothing.
    #[error("{0}")]
    NoRecourse(String),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Environment(_) => 4,
            CliError::NoRecourse(_) | CliError::Internal(_) => 1,
        }
    }
}

impl From<dear_core::Error> for CliError {
    fn from(e: dear_core::Error) -> Self {
        use dear_core::Error as E;
        match e {
            E::Config(_) | E::Schema(_) | E::Data { .. } | E::Json(_) | E::Csv(_) | E::Io(_) | E::BundleVersion(_) => {
                CliError::Usage(e.to_string())
            }
            E::Precondition(_) | E::Degenerate(_) => CliError::Precondition(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        match e.code {
            "bad_request" => CliError::Usage(e.message),
            "precondition" => CliError::Precondition(e.message),
            "no_recourse" => CliError::NoRecourse(e.message),
            _ => CliError::Internal(e.message),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
