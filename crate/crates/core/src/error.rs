use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("time {time} outside observation window [0, {horizon}]")]
    OutOfWindow { time: f64, horizon: f64 },

    #[error("dominating rate {omega} below holding rate {rate} for form {form}")]
    InvalidOmega { form: usize, omega: f64, rate: f64 },

    #[error("no valid initial state: {0}")]
    NoInitialState(String),

    #[error("numerical failure at sweep {sweep}: {message}")]
    Numerical { sweep: usize, message: String },

    #[error("{0}")]
    Data(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
