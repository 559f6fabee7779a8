//! Crate-wide error type.

use crate::solver::SolveReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inconsistent sizes, mismatched meshes, non-positive extents, and the like.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Degenerate or otherwise unusable element geometry.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A value outside the mathematical domain of an operation (e.g. negative density).
    #[error("domain error: {0}")]
    Domain(String),

    /// The mesh does not satisfy the angle condition an operator requires.
    #[error("unsupported mesh: {0}")]
    UnsupportedMesh(String),

    /// A pointwise function produced a non-finite value at a node.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Configuration file / key problems; lists every offending key.
    #[error("config error: {0}")]
    Config(String),

    /// The iterative solver ran out of iterations.
    #[error("solver did not converge: {report}")]
    SolverDiverged { report: SolveReport },

    /// A monitored discrete property failed while running in strict mode.
    #[error("invariant violation at step {step} (t={t}): {what}")]
    InvariantViolation { step: usize, t: f64, what: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
