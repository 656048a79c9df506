use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants fall into two broad classes: input validation (bad geometry,
/// malformed files, parameters out of range) and numerical failure
/// (factorization breakdown, non-converging iterations). [`Error::is_numerical`]
/// tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("all input points are collinear")]
    CollinearInput,
    #[error("boundary polygon is degenerate: {0}")]
    DegeneratePolygon(String),
    #[error("region does not intersect the mesh")]
    EmptyIntersection,
    #[error("mesh refinement exceeded {0} vertices")]
    RefinementLimit(usize),
    #[error("anisotropy matrix is not symmetric positive definite")]
    NonSpdAnisotropy,
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("graph is asymmetric: {0} lists {1} but not vice versa")]
    AsymmetricGraph(usize, usize),
    #[error("index {index} out of range (n = {n}) on line {line}")]
    IndexOutOfRange { index: i64, n: usize, line: usize },
    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("BYM2 weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("Newton iteration did not converge after {0} iterations")]
    NewtonDivergence(usize),
    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),
    #[error("integration grid exceeded {0} points")]
    GridExplosion(usize),
    #[error("precision must be positive, got {0}")]
    NonPositivePrecision(f64),
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("constraint rows are rank deficient")]
    RankDeficientConstraints,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NewtonDivergence(_)
                | Error::OptimizerFailure(_)
                | Error::GridExplosion(_)
                | Error::RefinementLimit(_)
                | Error::RankDeficientConstraints
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::CollinearInput => "CollinearInput",
            Error::DegeneratePolygon(_) => "DegeneratePolygon",
            Error::EmptyIntersection => "EmptyIntersection",
            Error::RefinementLimit(_) => "RefinementLimit",
            Error::NonSpdAnisotropy => "NonSpdAnisotropy",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::AsymmetricGraph(..) => "AsymmetricGraph",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::MalformedLine { .. } => "MalformedLine",
            Error::WeightOutOfRange(_) => "WeightOutOfRange",
            Error::NewtonDivergence(_) => "NewtonDivergence",
            Error::OptimizerFailure(_) => "OptimizerFailure",
            Error::GridExplosion(_) => "GridExplosion",
            Error::NonPositivePrecision(_) => "NonPositivePrecision",
            Error::NonPositiveArgument(_) => "NonPositiveArgument",
            Error::TooShort { .. } => "TooShort",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::RankDeficientConstraints => "RankDeficientConstraints",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
