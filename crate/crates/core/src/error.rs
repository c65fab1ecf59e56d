use thiserror::Error;

/// Errors raised while building, designing or simulating filter banks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("filter taps must not be empty")]
    EmptyTaps,

    #[error("autoregressive model is unstable (largest root magnitude {max_root:.6})")]
    UnstableAr { max_root: f64 },

    #[error("autocorrelation requested up to lag {requested}, model only provides lags up to {available}")]
    AcfLagOutOfRange { requested: usize, available: usize },

    #[error("bank is non-uniform; convert it with `nufb_to_ufb` first")]
    NonUniformBank,

    #[error("even-length highpass designs have a forced zero at Nyquist (length {0})")]
    EvenLengthHighpass(usize),

    #[error("no correlation row available for lag offset {0}")]
    MissingCorrelationRow(usize),

    #[error("empty delay range")]
    EmptyRange,

    #[error("no samples left after excluding the startup transient")]
    EmptyOverlap,

    #[error("analysis bank admits no perfect-reconstruction synthesis bank")]
    InfeasibleBank,

    #[error("delay {delay} is outside the perfect-reconstruction range {ranges}")]
    DelayOutOfRange { delay: usize, ranges: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error in {source_name}: {message}")]
    Config {
        source_name: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
