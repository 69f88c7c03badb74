use std::io;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("solver overflow at step {step} (t = {t}): non-finite values encountered")]
    Overflow { step: usize, t: f64 },
    #[error("optimizer failure: {0}")]
    Optimizer(String),
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("no peak: {0}")]
    NoPeak(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
