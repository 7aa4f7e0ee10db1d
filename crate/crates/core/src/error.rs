//! Error type shared across the crate.

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or input violates a documented domain requirement.
    /// The message names the violated invariant.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrated state stopped being finite (overflow or NaN).
    #[error("state became non-finite at t = {t}: {what}")]
    NonFinite { t: f64, what: String },

    /// A slip lookup table could not be parsed or fails validation.
    #[error("slip table: {0}")]
    Table(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
