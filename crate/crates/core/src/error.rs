use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parity error: {0}")]
    Parity(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("series did not converge after {terms} terms (last term {last:e})")]
    NonConvergence { terms: usize, last: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("time-change horizon exhausted: reached t = {reached} of {requested}")]
    Horizon { reached: f64, requested: f64 },
    #[error("degenerate path: {0}")]
    Degenerate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
