use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative input to geometric mean: a = {a}, b = {b}")]
    NegativeInput { a: f64, b: f64 },

    #[error("critical point: |grad| = {grad_norm:e} at x = {x:?} and no closed form is known")]
    CriticalPoint { grad_norm: f64, x: Vec<f64> },

    #[error("field has no analytic derivatives")]
    NoDerivatives,

    #[error("radius {radius:e} below lattice resolution h = {h:e}")]
    RadiusBelowResolution { radius: f64, h: f64 },

    #[error("point {x:?} (radius {radius:e}) leaves the definition region")]
    OutsideRegion { x: Vec<f64>, radius: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("empty c-grid")]
    EmptyCGrid,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("non-finite value at step {step}, node {node}")]
    NonFinite { step: usize, node: usize },

    #[error("grid spacing h = {h:e} exceeds band width {band:e}")]
    GridTooCoarse { h: f64, band: f64 },

    #[error("initial datum violates decay envelope C e^(-|x|) at {x:?}: |u0| = {value:e} > {bound:e}")]
    DecayViolation { x: Vec<f64>, value: f64, bound: f64 },

    #[error("shift {0:?} is not a lattice multiple")]
    NonLatticeShift(Vec<f64>),

    #[error("parameter mismatch between solution and game: {0}")]
    ParamsMismatch(String),

    #[error("episodes were not traced")]
    Untraced,

    #[error("barrier anchor rejected: {0}")]
    BadAnchor(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
