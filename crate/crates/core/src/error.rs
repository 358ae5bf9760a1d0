//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid angle theta = {0}: must lie in [0, pi/2) and differ from pi/4")]
    InvalidTheta(f64),
    #[error("invalid imprecision gamma = {0}: must be finite and >= 0")]
    InvalidGamma(f64),
    #[error("invalid depth: {0}")]
    InvalidDepth(String),
    #[error("invalid time window: tau = {tau}, T = {t}")]
    InvalidWindow { tau: usize, t: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("at least 2 samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("conditional state undefined at m = {m}: density {p:e} too small")]
    UndefinedState { m: f64, p: f64 },
    #[error("operator is not an involution: |Q^2 - I| = {0:e}")]
    NotInvolution(f64),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
