use thiserror::Error;

/// Broad failure category, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("negative mass {0} kg")]
    NegativeMass(f64),

    #[error("mass set is empty")]
    EmptyMassSet,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("inertia tensor is singular")]
    SingularInertia,

    #[error("simulation state became non-finite at t = {time:.6} s")]
    SimulationDiverged { time: f64 },

    #[error("series of {len} samples is too short, need more than {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("rest window is not still: gyro axis {axis} std {std:.4} rad/s exceeds {limit} rad/s")]
    NotAtRest { axis: usize, std: f64, limit: f64 },

    #[error("no reaction wheel pulse found in recording")]
    NoWheelPulse,

    #[error("{what} is rank deficient (condition {condition:.3e}); weakest direction {null_direction:?}")]
    RankDeficient {
        what: &'static str,
        null_direction: Vec<f64>,
        condition: f64,
    },

    #[error("insufficient excitation: only {fraction:.2} of samples exceed {threshold} rad/s")]
    InsufficientExcitation { fraction: f64, threshold: f64 },

    #[error("recursive least squares covariance became non-finite at row {row}")]
    CovarianceBlowUp { row: usize },

    #[error("calibration rejected: {0}")]
    DegenerateProof(String),

    #[error("principal axes are not unique (min relative gap {min_delta_sigma:.3e})")]
    DegenerateAxes { min_delta_sigma: f64 },

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) => ErrorKind::Usage,
            Error::SingularInertia
            | Error::SimulationDiverged { .. }
            | Error::RankDeficient { .. }
            | Error::InsufficientExcitation { .. }
            | Error::CovarianceBlowUp { .. }
            | Error::DegenerateProof(_)
            | Error::DegenerateAxes { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
