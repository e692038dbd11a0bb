use alloc::string::String;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("grid level {level} is outside 0..={max}")]
    LevelOutOfRange { level: u32, max: u32 },
    #[error("invalid {name}: {value}")]
    InvalidExponent { name: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("node indices must satisfy s < t within the grid (s = {s}, t = {t})")]
    NodeOrder { s: usize, t: usize },
    #[error("grids differ")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("covariance matrix is not positive definite at row {0}")]
    NotPositiveDefinite(usize),
    #[error("path does not match the analytic form `{0}`")]
    UnknownAnalyticForm(String),
    #[error("cascade table has not been built")]
    TableNotBuilt,
    #[error("level {level} cannot be resolved by a grid of level {grid_level}")]
    UnresolvableLevel { level: u32, grid_level: u32 },
    #[error("base level {0} is too coarse for the wavelet support")]
    BaseLevelTooCoarse(u32),
    #[error("symbol requires a second-order process")]
    MissingSecondOrder,
    #[error("symbol {0} is not part of this model")]
    UnsupportedSymbol(String),
    #[error("group element dimension {group} does not match symbol index {index}")]
    GroupDimension { group: usize, index: usize },
    #[error("modelled distribution is not in the image of a controlled path: {0}")]
    NotControlled(String),
    #[error("wavelet regularity {regularity} does not exceed {needed}")]
    InsufficientRegularity { regularity: f64, needed: f64 },
    #[error("gamma = {gamma} does not exceed the lowest homogeneity {lowest}")]
    GammaTooLow { gamma: f64, lowest: f64 },
    #[error("nonlinearity provides derivatives up to order {available}, {needed} required")]
    MissingDerivatives { available: usize, needed: usize },
    #[error("working box leaves the domain of the nonlinearity")]
    WorkingBoxExceeded,
    #[error(
        "Picard iteration failed to contract on a window shorter than one grid step at t = {0}"
    )]
    NonContraction(f64),
    #[error("paths are identical")]
    IdenticalPaths,
    #[error("not enough samples for a fit: {0}")]
    InsufficientSamples(String),
    #[error("mesh level {mesh} is finer than grid level {grid}")]
    MeshTooFine { mesh: u32, grid: u32 },
}

pub type Result<T> = core::result::Result<T, Error>;
