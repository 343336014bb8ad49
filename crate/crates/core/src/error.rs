use thiserror::Error;

use crate::map::PhasePoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("implicit step did not converge: last p' = {last}, residual = {residual:e}")]
    Solver { last: f64, residual: f64 },

    #[error("no periodic orbit {m}/{n} on line {line} at K = {k}: {reason}")]
    NotFound {
        m: u64,
        n: u64,
        k: f64,
        line: String,
        reason: String,
        /// (line parameter, residual) samples from the scan.
        scan: Vec<(f64, f64)>,
    },

    #[error("newton refinement failed after {iterations} iterations: {reason}")]
    Refinement {
        iterations: usize,
        reason: String,
        history: Vec<f64>,
    },

    #[error("continuation stalled at K = {last_good_k} (target {target_k}): {reason}")]
    Continuation {
        last_good_k: f64,
        target_k: f64,
        reason: String,
    },

    #[error("bracketing failure: {0}")]
    Bracket(String),

    #[error("criterion failed: {0}")]
    Criterion(String),

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error(
        "island width measurement escaped after {iterations} iterations at K = {k} (last point {last:?})"
    )]
    Width {
        k: f64,
        iterations: usize,
        max_excursion: f64,
        last: PhasePoint,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("merge conflict on {0:?}")]
    MergeConflict(Vec<String>),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or config).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Solver { .. }
                | Error::NotFound { .. }
                | Error::Refinement { .. }
                | Error::Continuation { .. }
                | Error::Bracket(_)
                | Error::Criterion(_)
                | Error::Width { .. }
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
