use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("CFL condition violated: dt = {dt} exceeds h/sqrt(n) = {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("axis {axis} out of range for dimension {n}")]
    Axis { axis: usize, n: usize },
    #[error("quadrature region {0} is empty")]
    EmptyRegion(String),
    #[error("invalid potential: {0}")]
    Potential(String),
    #[error("point {0:?} outside the computational box")]
    OutsideBox([f64; 3]),
    #[error("solver: {0}")]
    Solver(String),
    #[error("sponge reflection {reflection:.3e} above threshold {threshold:.3e}")]
    SpongeReflection { reflection: f64, threshold: f64 },
    #[error("invalid weight parameters: {0}")]
    Weight(String),
    #[error("exponent {0} overflows even after offsetting")]
    Overflow(f64),
    #[error("inequality violation candidate: right side vanishes while left side is {lhs}")]
    ZeroRhs { lhs: f64 },
    #[error("sequence is not decreasing at index {index}: {prev} -> {next}")]
    NonMonotone { index: usize, prev: f64, next: f64 },
    #[error("frequency {k} beyond Nyquist limit {nyquist}")]
    Nyquist { k: f64, nyquist: f64 },
    #[error("sphere under-sampled at k = {k}: {ppw:.2} points per wavelength, need {required}")]
    Undersampled { k: f64, ppw: f64, required: f64 },
    #[error("offset {0} (in eps units) was not recorded by the solve")]
    OffsetNotRecorded(f64),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
