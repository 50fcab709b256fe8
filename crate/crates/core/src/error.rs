use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hurwitz: spectral abscissa {abscissa:e} >= -1e-12")]
    NotHurwitz { abscissa: f64 },
    #[error("linear system is numerically singular: {0}")]
    SingularSystem(String),
    #[error("matrix exponential overflowed the representable range")]
    Overflow,
    #[error("Gramian tail does not converge (||e^(TA)|| = {norm:e} at T = {horizon})")]
    TailNotConvergent { horizon: f64, norm: f64 },
    #[error("h is unbounded at x = {0}")]
    DomainError(f64),
    #[error("A is not dissipative (margin {margin:e})")]
    NotDissipative { margin: f64 },
    #[error("pair (A, B) is not controllable (Kalman rank {rank} < {dim})")]
    NotControllable { rank: usize, dim: usize },
    #[error("closed loop A - kBB* is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotStabilized { abscissa: f64 },
    #[error("discretization violates <Az,z> <= 0 (margin {margin:e})")]
    NotDissipativeDiscretization { margin: f64 },
    #[error("certificate requires S = U but the system uses the sup norm on S")]
    WrongNormChoice,
    #[error("semi-global certificate needs an embedding constant c_S")]
    MissingCS,
    #[error("C_theta calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("local error target unreachable at t = {t} after {halvings} halvings")]
    StepRejectionLimit { t: f64, halvings: u32 },
    #[error("H-norm grew from {before:e} to {after:e} at t = {t}")]
    ContractionViolation { t: f64, before: f64, after: f64 },
    #[error("not enough usable samples for a fit ({have} < {need})")]
    InsufficientData { have: usize, need: usize },
    #[error("trajectory has no linear phase: {0}")]
    NoLinearPhase(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotHurwitz { .. } => "NotHurwitz",
            Error::SingularSystem(_) => "SingularSystem",
            Error::Overflow => "Overflow",
            Error::TailNotConvergent { .. } => "TailNotConvergent",
            Error::DomainError(_) => "DomainError",
            Error::NotDissipative { .. } => "NotDissipative",
            Error::NotControllable { .. } => "NotControllable",
            Error::NotStabilized { .. } => "NotStabilized",
            Error::NotDissipativeDiscretization { .. } => "NotDissipativeDiscretization",
            Error::WrongNormChoice => "WrongNormChoice",
            Error::MissingCS => "MissingCS",
            Error::CalibrationFailed(_) => "CalibrationFailed",
            Error::StepRejectionLimit { .. } => "StepRejectionLimit",
            Error::ContractionViolation { .. } => "ContractionViolation",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::NoLinearPhase(_) => "NoLinearPhase",
            Error::Dimension(_) => "Dimension",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }

    /// Process exit status used by the command-line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotHurwitz { .. } => 10,
            Error::SingularSystem(_) => 11,
            Error::Overflow => 12,
            Error::TailNotConvergent { .. } => 13,
            Error::DomainError(_) => 14,
            Error::NotDissipative { .. } => 15,
            Error::NotControllable { .. } => 16,
            Error::NotStabilized { .. } => 17,
            Error::NotDissipativeDiscretization { .. } => 18,
            Error::WrongNormChoice => 19,
            Error::MissingCS => 20,
            Error::CalibrationFailed(_) => 21,
            Error::StepRejectionLimit { .. } => 22,
            Error::ContractionViolation { .. } => 23,
            Error::InsufficientData { .. } => 24,
            Error::NoLinearPhase(_) => 25,
            Error::Dimension(_) => 26,
            Error::InvalidInput(_) => 27,
        }
    }
}
