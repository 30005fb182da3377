use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("beta = {beta} is within {tol:e} of the critical value {beta_c}; regime is ambiguous")]
    RegimeAmbiguous { beta: f64, beta_c: f64, tol: f64 },
    #[error("invalid fluid parameters: {0}")]
    InvalidParams(String),
    #[error("operation requires the {expected} regime")]
    WrongRegime { expected: &'static str },
    #[error("surface violates the depth bound: 1 + min(eta) = {depth} <= {h0}")]
    DomainViolation { depth: f64, h0: f64 },
    #[error("Neumann data must have zero mean (got {0:e})")]
    MeanNotZero(f64),
    #[error("strip solve failed to converge: residual {residual:e} after {iterations} iterations")]
    SolveFailure { residual: f64, iterations: usize },
    #[error("profile is identically zero")]
    ZeroProfile,
    #[error("NLS model is not focusing: A3/2 + A4 = {0}")]
    NotFocusing(f64),
    #[error("could not invert the momentum relation for the test-function amplitude")]
    InversionFailure,
    #[error("state lies outside the H2 ball: t = {t} >= M^2 = {m2}")]
    OutsideBall { t: f64, m2: f64 },
    #[error("spectral cutoff {0} is not admissible")]
    BadCutoff(f64),
    #[error("minimizer diverged: {0}")]
    Diverged(String),
    #[error("minimizer collapsed to the zero profile (|eta|_2 = {0:e})")]
    CollapsedToZero(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
