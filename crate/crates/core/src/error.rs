use crate::paths::APath;
use crate::scalar_field::{EvalError, ParseError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid structure data: {0}")]
    Structure(String),
    #[error("metric is not positive definite at {x:?} (smallest eigenvalue {min_eigenvalue:e})")]
    SingularMetric { x: Vec<f64>, min_eigenvalue: f64 },
    #[error("trajectory left the chart domain at t = {t}")]
    DomainExit { t: f64, partial: Box<APath> },
    #[error("point {0:?} lies outside the chart domain")]
    OutsideDomain(Vec<f64>),
    #[error("degenerate pair: Gram determinant {0:e}")]
    DegeneratePair(f64),
    #[error("vector is not tangent to the leaf (residual {0:e})")]
    NotInAnchorImage(f64),
    #[error("unsupported chart: {0}")]
    Unsupported(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("mesh too coarse: {0}")]
    MeshTooCoarse(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("path is not a geodesic (residual {0:e})")]
    NotGeodesic(f64),
    #[error("transversality residual {residual:e} exceeds {tolerance:e}; the mesh is probably too coarse")]
    Transversality { residual: f64, tolerance: f64 },
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),
    #[error("chart file line {line}: {message}")]
    ChartFile { line: usize, message: String },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
