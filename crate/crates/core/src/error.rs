use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (|a[{row}][{col}] - a[{col}][{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("aggregate {xi} lies outside the open funnel ({lower}, {upper}) at t = {t}")]
    OutsideFunnel {
        xi: f64,
        t: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid bound curve: {0}")]
    InvalidCurve(String),

    #[error("invalid funnel: {0}")]
    InvalidFunnel(String),

    #[error("degenerate input-output path: {0}")]
    Degenerate(String),

    #[error("improper filter: numerator degree {numerator} exceeds denominator degree {denominator}")]
    ImproperFilter { numerator: usize, denominator: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}
