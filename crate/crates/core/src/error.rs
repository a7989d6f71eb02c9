use thiserror::Error;

/// Errors raised by the statistics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or out-of-range input.
    #[error("invalid input: {0}")]
    Input(String),

    /// Two observations coincide, so the spatial-sign direction is undefined.
    #[error("degenerate observation pair ({i}, {j}): difference norm below tolerance")]
    DegeneratePair { i: usize, j: usize },

    /// The kernel has no closed-form parameter for this marginal law.
    #[error("no closed-form parameter for kernel {kernel} under {marginal}")]
    UnsupportedPair { kernel: String, marginal: String },

    /// Invalid simulation or study configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
