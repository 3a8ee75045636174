use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{family}: natural parameter {x} is outside the model domain")]
    Domain { family: &'static str, x: f64 },

    #[error("SVD did not converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("solver step size underflowed at iteration {iteration} (step {step:e})")]
    StepUnderflow { iteration: usize, step: f64 },

    #[error("index ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("statistic undefined before the first observation")]
    NoObservations,

    #[error("noise class mismatch: expected {expected}, got {actual}")]
    WrongNoiseKind {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("t = {t} is not a checkpoint of the {count}-point grid over horizon {horizon}")]
    NotCheckpoint {
        t: usize,
        count: usize,
        horizon: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown model family `{0}`")]
    UnknownFamily(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
