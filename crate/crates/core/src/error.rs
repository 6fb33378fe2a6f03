use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("columns are not orthonormal (residual {residual:e})")]
    NotOrthonormal { residual: f64 },
    #[error("not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },
    #[error("ambiguous fit: smallest singular values {sigma_min:e} and {sigma_next:e} are not separated")]
    RankDegenerate { sigma_min: f64, sigma_next: f64 },
    #[error("point is not on the boundary (defining value {value:e})")]
    NotOnBoundary { value: f64 },
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("w = {re} + {im}i lies on the branch cut of the principal logarithm")]
    BranchCut { re: f64, im: f64 },
    #[error("w vanishes; the logarithmic chart is undefined")]
    ZeroW,
    #[error("pole of the Cayley transform at W = -i")]
    PoleAtMinusI,
    #[error("pole of the inverse Cayley transform at eta = -1")]
    PoleAtMinusOne,
    #[error("chart stage mismatch: expected {expected}, got {got}")]
    StageMismatch { expected: &'static str, got: &'static str },
    #[error("invalid transform: homogeneous denominator vanishes")]
    InvalidTransform,
    #[error("transform does not fix the base point Q (residual {residual:e})")]
    DoesNotFixBase { residual: f64 },
    #[error("fitted matrix is not a ball automorphism (H-unitarity residual {residual:e})")]
    NotBallAut { residual: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("map is not proper: {0}")]
    NotProper(String),
    #[error("map is not of classified form: {0}")]
    NotClassifiedForm(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("ball fit failed: {0}")]
    FitFailed(String),
    #[error("constraint residual too large: {0}")]
    ConstraintResidualLarge(String),
    #[error("target is not generic: {0}")]
    NonGenericTarget(String),
    #[error("map evaluation failed at {at}: {source}")]
    Evaluation {
        at: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Machine-readable name of the variant.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFinite(_) => "NonFinite",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NotOrthonormal { .. } => "NotOrthonormal",
            Error::NotUnitary { .. } => "NotUnitary",
            Error::RankDegenerate { .. } => "AmbiguousFit",
            Error::NotOnBoundary { .. } => "NotOnBoundary",
            Error::ParameterMismatch(_) => "ParameterMismatch",
            Error::BranchCut { .. } => "BranchCut",
            Error::ZeroW => "ZeroW",
            Error::PoleAtMinusI => "PoleAtMinusI",
            Error::PoleAtMinusOne => "PoleAtMinusOne",
            Error::StageMismatch { .. } => "StageMismatch",
            Error::InvalidTransform => "InvalidTransform",
            Error::DoesNotFixBase { .. } => "DoesNotFixBase",
            Error::NotBallAut { .. } => "NotBallAut",
            Error::InsufficientData(_) => "InsufficientData",
            Error::Schema { .. } => "SchemaViolation",
            Error::NotProper(_) => "NotProper",
            Error::NotClassifiedForm(_) => "NotClassifiedForm",
            Error::HypothesisViolated(_) => "HypothesisViolated",
            Error::FitFailed(_) => "FitFailed",
            Error::ConstraintResidualLarge(_) => "ConstraintResidualLarge",
            Error::NonGenericTarget(_) => "NonGenericTarget",
            Error::Evaluation { source, .. } => source.reason(),
        }
    }

    /// True for rejections that describe the input rather than a failure of
    /// the machinery (CLI exit code 2).
    pub fn is_domain_rejection(&self) -> bool {
        match self {
            Error::NonFinite(_) => false,
            Error::Evaluation { source, .. } => source.is_domain_rejection(),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
