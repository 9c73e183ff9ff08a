use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported root system: family {family} with parameter {param}")]
    UnsupportedFamily { family: String, param: usize },

    #[error("zero root")]
    ZeroRoot,

    #[error("invalid root system: {0}")]
    InvalidRootSystem(String),

    #[error("not a finite reflection group at this tolerance (more than {cap} elements)")]
    GroupTooLarge { cap: usize },

    #[error("invalid multiplicity: {0}")]
    InvalidMultiplicity(String),

    #[error("k is not in M*: W_n is singular at degree n = {degree}")]
    NotInMStar { degree: usize },

    #[error("degree {requested} requested but the context is prepared only up to {prepared}")]
    NotPrepared { requested: usize, prepared: usize },

    #[error("polynomial is not homogeneous{0}")]
    NonHomogeneous(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature rule integrates exactly to degree {available}, degree {needed} needed")]
    RuleTooWeak { needed: usize, available: usize },

    #[error(
        "tolerance {tol:e} unreachable within degree cap {cap} (tail bound {bound:e}); \
         certified radius at this cap is {certified_radius:.6}"
    )]
    ToleranceUnreachable { tol: f64, cap: usize, bound: f64, certified_radius: f64 },

    #[error("internal error: inexact division by a root form (remainder {0})")]
    InexactDivision(String),

    #[error("integrand has no certified decay; supply a Gaussian factor or a decay envelope")]
    NoCertifiedDecay,

    #[error("quadrature rule too large: {points} points exceed the cap {cap}")]
    RuleTooLarge { points: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
