use thiserror::Error;

/// Errors raised across the estimation, simulation and benchmarking layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("mass matrix is numerically singular")]
    SingularDynamics,

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("simulation diverged at tick {tick} (t = {time:.4} s): |qd| = {speed:.3e} rad/s")]
    Diverged { tick: usize, time: f64, speed: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("observer `{0}` diverged")]
    ObserverDiverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn ensure_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} contains non-finite entries")))
    }
}
