use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("a point on the sphere needs at least 2 coordinates, got {0}")]
    TooFewCoordinates(usize),

    #[error("vector cannot be normalized (norm {0})")]
    NotNormalizable(f64),

    #[error("logarithmic map is undefined for antipodal points")]
    AntipodalPoints,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("radial integral order must be 0, 1 or 2, got {0}")]
    InvalidOrder(usize),

    #[error("rejection sampler acceptance rate {rate:.2e} after {proposed} proposals; use the MH sampler for small scales")]
    RejectionInefficient { rate: f64, proposed: u64 },

    #[error("degenerate initialization: weighted extrinsic mean has zero norm")]
    DegenerateInitialization,

    #[error("dispersion {0} outside bijection range (0, pi)")]
    DispersionOutOfRange(f64),

    #[error("zero dispersion, scale estimate undefined")]
    ZeroDispersion,

    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("number of clusters {k} exceeds number of points {n}")]
    TooManyClusters { k: usize, n: usize },

    #[error("component {0} has no mass and no previous parameters to fall back on")]
    EmptyComponent(usize),

    #[error("numerical underflow in E-step at row {0}")]
    NumericalUnderflow(usize),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid membership matrix: {0}")]
    InvalidMembership(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing column(s) {missing:?}; available columns: {available:?}")]
    MissingColumns {
        missing: Vec<String>,
        available: Vec<String>,
    },

    #[error("row {0} has zero total over the selected categories")]
    ZeroSumRow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
