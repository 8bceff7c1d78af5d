use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular response matrix at omega = {omega} rad/s")]
    Singular { omega: f64 },

    #[error("fit initialization failed: {0}")]
    Initialization(String),

    #[error("parameters not identifiable: {0}")]
    Unidentifiable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Singular { .. } => "singular",
            Error::Initialization(_) => "fit-initialization",
            Error::Unidentifiable(_) => "unidentifiable",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
