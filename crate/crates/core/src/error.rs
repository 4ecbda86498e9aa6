use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Inputs disagree in size or reference something that does not exist.
    #[error("configuration error: {0}")]
    Config(String),
    /// A value violates a documented invariant (ordering, positivity, ...).
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },
    /// An operation was called in a state where it is undefined.
    #[error("logic error: {0}")]
    Logic(String),
    /// The simulated state stopped being finite.
    #[error("numerical abort at cycle {cycle}: {reason}")]
    NumericalAbort { cycle: usize, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn logic(msg: impl Into<String>) -> Self {
        Error::Logic(msg.into())
    }
}
