use thiserror::Error;

/// Failures reported by the library.
///
/// [`Error::kind`] groups them into configuration problems and numerical
/// problems, which the command-line front end maps to distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("s = {s} lies within {distance:e} of the bath pole at ±i{omega}")]
    PoleProximity { s: String, omega: f64, distance: f64 },
    #[error("quadrature did not converge: achieved error estimate {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("Laplace inversion did not converge: estimates {coarse} and {fine} differ by {difference:e}")]
    Talbot { coarse: String, fine: String, difference: f64 },
    #[error("root finding failed: largest residual {residual:e}")]
    RootFinding { residual: f64 },
    #[error("caustic: |beta(t)| = {beta_abs:e} is below the threshold {threshold:e}")]
    Caustic { beta_abs: f64, threshold: f64 },
    #[error("near-singular bath matrix: condition number {condition:e}, smallest |sin(omega_j t)| at mode {mode}")]
    NearSingular { condition: f64, mode: usize },
    #[error("resonance: bath mode {mode} has frequency within 1e-9 of the oscillator frequency")]
    Resonance { mode: usize },
    #[error("exponent overflow: real part {real_part:e}")]
    Overflow { real_part: f64 },
    #[error("non-normalizable Gaussian: eigenvalues of the real part are {eigenvalues:?}")]
    Definiteness { eigenvalues: Vec<f64> },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("validation failed for {quantity}: paper-literal {paper_literal}, validated {validated}, oracle {oracle}")]
    Validation { quantity: String, paper_literal: f64, validated: f64, oracle: f64 },
    #[error("numerical consistency: {quantity} has imaginary residue {residue:e}")]
    Consistency { quantity: String, residue: f64 },
    #[error("ODE integration stalled at t = {t}: step size underflow")]
    Stiffness { t: f64 },
    #[error("spectral sum truncation estimate {estimate:e} exceeds {limit:e}")]
    Truncation { estimate: f64, limit: f64 },
    #[error("indefinite Hamiltonian: smallest Hessian eigenvalue {0:e}")]
    Indefinite(f64),
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Configuration,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => ErrorKind::Configuration,
            _ => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
