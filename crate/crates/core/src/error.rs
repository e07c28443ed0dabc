use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid base map: {0}")]
    InvalidBase(String),

    #[error("invalid cocycle: {0}")]
    InvalidCocycle(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unsupported measure: {0}")]
    UnsupportedMeasure(String),

    #[error("no MME approximation available for {0}")]
    NoMmeApproximation(String),

    #[error("non-Hölder family: {0}")]
    NonHolderFamily(String),

    #[error("base not hyperbolic")]
    BaseNotHyperbolic,

    #[error("point ({u}, {v}) is not periodic with period {period}: return distance {distance:e}")]
    NotPeriodic {
        u: f64,
        v: f64,
        period: usize,
        distance: f64,
    },

    #[error("no conjugacy at this resolution ({resolution}): residual {residual:e} after {sweeps} sweeps")]
    NoConjugacy {
        resolution: usize,
        residual: f64,
        sweeps: usize,
    },

    #[error("conjugacy inversion did not converge at ({u}, {v})")]
    InversionFailed { u: f64, v: f64 },

    #[error("already simple/hyperbolic: lambda {lambda:e} exceeds {lambda_min:e}")]
    AlreadySimple { lambda: f64, lambda_min: f64 },

    #[error("hyperbolic: lowering out of scope")]
    HyperbolicStart,

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("parse error: {0}")]
    Parse(String),
}
