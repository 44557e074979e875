use thiserror::Error;

#[derive(Debug, Error)]
pub enum QecError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("site index {site} out of range for {n_sites} sites")]
    InvalidSite { site: usize, n_sites: usize },
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QecError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        QecError::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, QecError>;

impl QecError {
    /// Process exit status: 1 for configuration and I/O problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            QecError::Config(_) | QecError::Io(_) | QecError::InvalidParameter { .. } => 1,
            _ => 2,
        }
    }
}
