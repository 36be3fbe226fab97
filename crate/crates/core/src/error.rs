use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cells per axis must be a power of two: {axis} = {value}")]
    NonPowerOfTwoCells { axis: &'static str, value: u32 },

    #[error("extent must be positive: {axis} = {value}")]
    NonPositiveExtent { axis: &'static str, value: f64 },

    #[error("factor dimension must be 1 or 2: {which} = {value}")]
    UnsupportedDimension { which: &'static str, value: u32 },

    #[error("{name} must satisfy {constraint}: got {value}")]
    InvalidExponent {
        name: &'static str,
        value: f64,
        constraint: String,
    },

    #[error("non-finite sample at index {index}")]
    NonFiniteValue { index: usize },

    #[error("value length {got} does not match grid cell count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("rectangle does not fit the grid: {reason}")]
    RectangleOutOfGrid { reason: String },

    #[error("no rectangle matches the requested family")]
    EmptyFamily,

    #[error("dilation by 2^-{ell} drops a side of {side} cells below one cell")]
    DilationTooSmall { side: u32, ell: i32 },

    #[error("distance ratio with a zero component lies in no cone")]
    NotInAnyCone,

    #[error("weight pair is trivial on the rectangle (omega vanishes or sigma^-1 vanishes)")]
    TrivialWeight,

    #[error("weight must be {constraint} (violated at cell {index})")]
    InvalidWeight {
        constraint: &'static str,
        index: usize,
    },

    #[error("denominator norm is zero")]
    ZeroNorm,

    #[error("grid with {cells} cells exceeds the direct-sum guard of {limit}")]
    GuardExceeded { cells: usize, limit: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("decay fit needs at least 3 positive entries with |l| >= 1, have {have}")]
    FitTooFewPoints { have: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
