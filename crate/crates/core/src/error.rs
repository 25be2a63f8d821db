use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid scheme parameters: {0}")]
    InvalidScheme(String),
    #[error("atomic point at t = {t}: no density")]
    AtomicPoint { t: f64 },
    #[error("zero survivor mass at t = {t}")]
    ZeroSurvivorMass { t: f64 },
    #[error("infinite moment")]
    InfiniteMoment,
    #[error("degenerate conditioning: P(eta1 > {t}) = 0")]
    DegenerateConditioning { t: f64 },
    #[error("no finite crossing in interval [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("unstable: rho = {rho} >= 1")]
    Unstable { rho: f64 },
    #[error("requires homogeneous rates (mu_i = 1 for all i)")]
    RequiresHomogeneousRates,
    #[error("nonpositive step {0}")]
    NonpositiveStep(f64),
    #[error("quadrature did not converge (value {value}, error estimate {error_estimate})")]
    Quadrature { value: f64, error_estimate: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameters(_)
            | Error::InvalidConfig(_)
            | Error::InvalidScheme(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::RequiresHomogeneousRates
            | Error::NonpositiveStep(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
