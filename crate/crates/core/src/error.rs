use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Variants split into input-validation failures (bad parameters, bad files,
/// violated hypotheses) and numerical failures discovered while computing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid curvature data: {0}")]
    Geometry(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    EigenConvergence(usize),

    #[error("non-finite integrand sample at {0}")]
    NonFinite(String),

    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tol:e}")]
    Unresolved { estimate: f64, tol: f64 },

    #[error("truncation tail is not decreasing (tail {small:e} at R, {large:e} at 2R)")]
    Divergent { small: f64, large: f64 },

    #[error("root is not bracketed: f(lo) = {lo:e}, f(hi) = {hi:e}")]
    Bracket { lo: f64, hi: f64 },

    #[error("boundary trace is degenerate (integral of |u|^p = {0:e})")]
    DegenerateTrace(f64),

    #[error("no descent step found after backtracking at iteration {0}")]
    NonMonotone(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the caller's inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Hypothesis(_) | Error::Geometry(_) | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
