use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix dimension {dim} exceeds the configured cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("evaluation frequency {omega} rad/s hits an undamped pole")]
    Pole { omega: f64 },

    #[error("notch frequency {omega_n} rad/s is out of range (must be below {limit} rad/s)")]
    NotchOutOfRange { omega_n: f64, limit: f64 },

    #[error("clock mismatch: control runs at {clock} Hz but the frontend was designed for {design} Hz")]
    ClockMismatch { clock: f64, design: f64 },

    #[error("state diverged in period {period} (|x| = {max_abs:e})")]
    Unstable { period: usize, max_abs: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("infeasible filter specification: {0}")]
    InfeasibleFilter(String),

    #[error("sequence of length {len} is too short (need at least {need})")]
    TooShort { len: usize, need: usize },

    #[error("LMS calibration diverged at iteration {iteration} (mse {mse:e})")]
    Diverged { iteration: u64, mse: f64 },

    #[error("no identifiable notch: {0}")]
    NoNotch(String),

    #[error("no noise bins inside the measurement band")]
    EmptyNoiseBand,

    #[error("config file not found: {0}")]
    ConfigNotFound(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "non_finite",
            Error::DimensionCap { .. } => "dimension_cap",
            Error::NotPowerOfTwo(_) => "not_power_of_two",
            Error::Pole { .. } => "pole",
            Error::NotchOutOfRange { .. } => "notch_out_of_range",
            Error::ClockMismatch { .. } => "clock_mismatch",
            Error::Unstable { .. } => "unstable",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InfeasibleFilter(_) => "infeasible_filter",
            Error::TooShort { .. } => "too_short",
            Error::Diverged { .. } => "diverged",
            Error::NoNotch(_) => "no_notch",
            Error::EmptyNoiseBand => "empty_noise_band",
            Error::ConfigNotFound(_) => "config_not_found",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
