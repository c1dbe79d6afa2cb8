use std::path::PathBuf;

use thiserror::Error;

use crate::krylov::SolveReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite: nonpositive pivot at index {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("singular matrix at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate tetrahedron {tet} (volume {volume:e})")]
    DegenerateElement { tet: usize, volume: f64 },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("indefinite operator detected in {0}")]
    Indefinite(&'static str),
    #[error("dense oracle limit exceeded: dimension {dim} > {limit}")]
    DenseLimit { dim: usize, limit: usize },
    #[error("inner Schur solve did not converge after {} iterations", .report.iterations)]
    InnerSolve { report: Box<SolveReport> },
    #[error("parse error{}: {msg}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub(crate) fn check_dim(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { op, expected, got })
    }
}
