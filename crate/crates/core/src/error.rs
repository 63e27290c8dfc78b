//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event times must be strictly increasing (violation at index {index})")]
    NonIncreasingTimes { index: usize },

    #[error("mark {mark} at index {index} is outside 0..{dim}")]
    MarkOutOfRange { index: usize, mark: i64, dim: usize },

    #[error("event time {time} at index {index} is outside the window [0, {horizon})")]
    TimeOutOfWindow { index: usize, time: f64, horizon: f64 },

    #[error("invalid dimension or horizon: {0}")]
    InvalidWindow(String),

    #[error("rates must be nonnegative (coordinate {index} is {value})")]
    NegativeRate { index: usize, value: f64 },

    #[error("rates must be strictly positive (coordinate {index} is {value})")]
    NonPositiveRate { index: usize, value: f64 },

    #[error("kernel is unstable: spectral radius of the branching matrix is {radius} >= 1")]
    UnstableKernel { radius: f64 },

    #[error("input collection is empty")]
    EmptyInput,

    #[error("inputs disagree on dimension: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lag grid spans {span}, too coarse for the shortest stream (T = {horizon}); need span < T/2")]
    GridTooCoarse { span: f64, horizon: f64 },

    #[error("discretised system is numerically singular (reciprocal condition estimate {rcond:.3e})")]
    SingularSystem { rcond: f64 },

    #[error("prediction error covariance is singular at recursion order {order}")]
    SingularErrorMatrix { order: usize },

    #[error("innovation covariance V is singular at row {index}")]
    SingularV { index: usize },

    #[error("evaluation grid point {time} is outside the usable window ({lo}, {hi}]")]
    GridOutOfRange { time: f64, lo: f64, hi: f64 },

    #[error("non-finite value produced during {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Coarse classification used by the CLI for exit codes: invalid inputs
    /// and data problems vs numeric failures vs I/O.
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            NonIncreasingTimes { .. }
            | MarkOutOfRange { .. }
            | TimeOutOfWindow { .. }
            | InvalidWindow(_)
            | NegativeRate { .. }
            | NonPositiveRate { .. }
            | EmptyInput
            | DimensionMismatch { .. }
            | GridTooCoarse { .. }
            | GridOutOfRange { .. }
            | InvalidParameter(_) => ErrorKind::Input,
            UnstableKernel { .. }
            | SingularSystem { .. }
            | SingularErrorMatrix { .. }
            | SingularV { .. }
            | NonFinite(_) => ErrorKind::Numeric,
            Io(_) | Csv(_) | Json(_) => ErrorKind::Io,
        }
    }

    /// Stable machine-readable name of the error variant.
    pub fn name(&self) -> &'static str {
        use Error::*;
        match self {
            NonIncreasingTimes { .. } => "NonIncreasingTimes",
            MarkOutOfRange { .. } => "MarkOutOfRange",
            TimeOutOfWindow { .. } => "TimeOutOfWindow",
            InvalidWindow(_) => "InvalidWindow",
            NegativeRate { .. } => "NegativeRate",
            NonPositiveRate { .. } => "NonPositiveRate",
            UnstableKernel { .. } => "UnstableKernel",
            EmptyInput => "EmptyInput",
            DimensionMismatch { .. } => "DimensionMismatch",
            GridTooCoarse { .. } => "GridTooCoarse",
            SingularSystem { .. } => "SingularSystem",
            SingularErrorMatrix { .. } => "SingularErrorMatrix",
            SingularV { .. } => "SingularV",
            GridOutOfRange { .. } => "GridOutOfRange",
            NonFinite(_) => "NonFinite",
            InvalidParameter(_) => "InvalidParameter",
            Io(_) => "Io",
            Csv(_) => "Csv",
            Json(_) => "Json",
        }
    }
}

/// Exit-code classification for the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numeric,
    Io,
}
