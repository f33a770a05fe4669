use thiserror::Error;

/// Errors raised by the compute modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("space has no points")]
    EmptySpace,

    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("weight of point {index} is {weight}; weights must be positive and finite")]
    BadWeight { index: usize, weight: f64 },

    #[error("distance matrix is not square ({len} entries)")]
    MatrixNotSquare { len: usize },

    #[error("distance matrix is not symmetric at ({i}, {j}): {dij} vs {dji}")]
    MatrixNotSymmetric {
        i: usize,
        j: usize,
        dij: f64,
        dji: f64,
    },

    #[error("distance between distinct points {i} and {j} is {value}; must be positive")]
    DegenerateDistance { i: usize, j: usize, value: f64 },

    #[error("triangle inequality violated on ({a}, {b}, {c}): d(a,c) exceeds d(a,b)+d(b,c) by {excess:e}")]
    TriangleViolation {
        a: usize,
        b: usize,
        c: usize,
        excess: f64,
    },

    #[error("invalid space specification: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("invalid target point: {0}")]
    InvalidPoint(String),

    #[error("target kinds do not match: {0}")]
    KindMismatch(String),

    #[error("barycenter did not converge after {passes} passes (residual {residual:e})")]
    BarycenterNotConverged {
        passes: usize,
        residual: f64,
        last: Box<crate::target::TargetPoint>,
    },

    #[error("seminorm dimension mismatch: expected {expected}, found {found}")]
    SeminormDim { expected: usize, found: usize },

    #[error("Hilbert-Schmidt norm is undefined for polyhedral seminorms")]
    NotQuadratic,

    #[error("fit at point {point}: {neighbors} neighbors available, {required} required")]
    InsufficientNeighbors {
        point: usize,
        neighbors: usize,
        required: usize,
    },

    #[error("fit at point {point}: design matrix is rank deficient ({detail})")]
    RankDeficient { point: usize, detail: String },

    #[error("point {point} is not a member of the chart")]
    NotChartMember { point: usize },

    #[error("invalid atlas: {0}")]
    InvalidAtlas(String),

    #[error("map has {found} values, space has {expected} points")]
    MapLength { expected: usize, found: usize },

    #[error("all scales are below the sampling resolution {threshold:e}")]
    NoReliableScale { threshold: f64 },

    #[error("post-composition map is not 1-Lipschitz: ratio {ratio} on pair ({i}, {j})")]
    NotContraction { i: usize, j: usize, ratio: f64 },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("missing value at index {0}")]
    MissingValue(usize),

    #[error("barycenter failed at point {point}: {source}")]
    RelaxFailed {
        point: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("boundary values of the two maps differ at index {0}")]
    BoundaryMismatch(usize),

    #[error("Dirichlet form is singular: interior component containing {representative} ({size} points) does not touch the boundary layer")]
    SingularForm { representative: usize, size: usize },

    #[error("fixture generation failed audit: {0}")]
    FixtureAudit(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
