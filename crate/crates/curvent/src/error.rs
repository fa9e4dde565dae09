//! Error taxonomy shared by every module.

use thiserror::Error;

/// Failure modes surfaced by the library.
///
/// `Domain` means the mathematical object handed in is malformed (negative
/// mass, rows that do not sum to one, a metric violating the triangle
/// inequality). `Usage` means the call itself is inconsistent (mismatched
/// dimensions, an empty pair set, a missing generator set). `Contract`
/// means a quantity the caller asserted was violated when verified, for
/// example a user-supplied Lipschitz override that fails on some pair.
/// `Numerical` wraps breakdowns of floating-point linear algebra and
/// carries whatever conditioning information is available.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
