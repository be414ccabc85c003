use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pole of {function} at s = {re}{im:+}i")]
    Pole {
        function: &'static str,
        re: f64,
        im: f64,
    },

    #[error("pole collision at s = {re}{im:+}i: both terms singular")]
    PoleCollision { re: f64, im: f64 },

    #[error("domain error in {function}: {reason}")]
    Domain {
        function: &'static str,
        reason: String,
    },

    #[error("cross-validation mismatch in {what}: {a} vs {b} (tolerance {tol})")]
    CrossValidation {
        what: &'static str,
        a: f64,
        b: f64,
        tol: f64,
    },

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("u = {u} outside table range [{lo}, {hi}]")]
    TableRange { u: f64, lo: f64, hi: f64 },

    #[error("step size underflow at u = {u}")]
    StepUnderflow { u: f64 },

    #[error("tail truncation estimate {estimate:e} exceeds tolerance {tol:e}")]
    TailTruncation { estimate: f64, tol: f64 },

    #[error("derivative step unstable at E = {e}: estimates {d1} and {d2}")]
    DerivativeUnstable { e: f64, d1: f64, d2: f64 },

    #[error("non-positive norm {value} at E = {e}")]
    NonPositiveNorm { e: f64, value: f64 },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed cache entry {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
