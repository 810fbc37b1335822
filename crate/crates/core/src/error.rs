use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },

    #[error("lambda must lie in [0, 1], got {0}")]
    LambdaOutOfRange(f64),

    #[error("W_z must lie in (1/sqrt(3), 1], got {0}")]
    WzOutOfRange(f64),

    #[error("invalid component caps {caps:?}: each must lie in (0, 1] with squared sum >= 1")]
    InvalidCaps { caps: [f64; 3] },

    #[error("unknown protocol id `{0}`")]
    UnknownProtocol(String),

    #[error("bad protocol parameter: {0}")]
    BadParameter(String),

    #[error("protocol `{0}` does not provide exact distributions")]
    ExactUnsupported(String),

    #[error("no records for setting pair a={a:?}, b={b:?}")]
    MissingSettings { a: [f64; 3], b: [f64; 3] },

    #[error("need at least {needed} b-settings for the linear fit, found {found}")]
    InsufficientSettings { needed: usize, found: usize },

    #[error("b-settings do not span the sphere")]
    RankDeficient,

    #[error("active-compensation data cannot be certified in separated mode: {0}")]
    ActiveCompensation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
