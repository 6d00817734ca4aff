use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature did not converge on [{a}, {b}]: residual estimate {residual:e}")]
    Quadrature { a: f64, b: f64, residual: f64 },
    #[error("root finding failed for target {target}")]
    RootFinding { target: f64 },
    #[error("unsupported profile: {0}")]
    UnsupportedProfile(&'static str),
    #[error("step {step} too large for the requested tolerance; use at most {suggested}")]
    StepTooLarge { step: f64, suggested: f64 },
    #[error("spectral density is singular at lambda = 0")]
    SingularEndpoint,
    #[error("ill-conditioned matching system at omega = {omega} (|det| = {det:e})")]
    IllConditioned { omega: f64, det: f64 },
    #[error("coefficient count mismatch: expected {expected}, got {got}")]
    NodeMismatch { expected: usize, got: usize },
    #[error("ratio undefined for the zero function")]
    ZeroFunction,
    #[error("reconstruction diverged at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("window too small: {0}")]
    Window(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
