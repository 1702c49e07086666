use thiserror::Error;

/// Everything that can go wrong in the geometry engine and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point outside chart domain: {0}")]
    OutsideChart(String),
    #[error("geodesic left the profile domain at t = {t}")]
    LeftDomain { t: f64 },
    #[error("integrator step size underflow at s = {s}")]
    StepUnderflow { s: f64 },
    #[error("integration quality check failed: {0}")]
    IntegrationQuality(String),
    #[error("boundary value problem did not converge: {0}")]
    BvpNonConvergence(String),
    #[error("minimizing geodesic is ambiguous (cut locus suspected): lengths {0} and {1}")]
    AmbiguousGeodesic(f64, f64),
    #[error("invalid manifold: {0}")]
    InvalidManifold(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("triangle inequality violated by {excess:e} on ({i}, {j}, {m})")]
    TriangleInequality { i: usize, j: usize, m: usize, excess: f64 },
    #[error("operation requires the (2,0) pattern, got ({k},{l})")]
    WrongPattern { k: usize, l: usize },
    #[error("sub-instance must keep both poles")]
    PoleDropped,
    #[error("fourth derivative unresolved: value {value:e}, error estimate {error:e}")]
    Unresolved { value: f64, error: f64 },
    #[error("tangent injectivity guard violated: {0}")]
    TilGuard(String),
    #[error("geodesic not verified minimizing: {0}")]
    NotMinimizing(String),
    #[error("initial portion of a side exits the flat band: {0}")]
    LeavesBand(String),
    #[error("invariant verification failed: {0}")]
    InvariantViolation(String),
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },
    #[error("line {line}, field `{path}`: {msg}")]
    Schema { path: String, line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
