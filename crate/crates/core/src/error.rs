use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("received power {0:e} W is not usable for ranging")]
    NonPositiveRss(f64),

    #[error("cosine product {0:e} is not positive; anchor is behind the emitter or outside the field of view")]
    NonPositiveCosine(f64),

    #[error("need at least {needed} usable anchors, got {got}")]
    TooFewAnchors { needed: usize, got: usize },

    #[error("anchor geometry is rank deficient (collinear anchors)")]
    DegenerateGeometry,

    #[error("sample rate {sample_rate} Hz must exceed twice the highest beacon frequency {max_frequency} Hz")]
    Nyquist { sample_rate: f64, max_frequency: f64 },

    #[error("analysis window of {window} samples does not align {frequency} Hz with an FFT bin")]
    MisalignedWindow { frequency: f64, window: usize },

    #[error("waveform has {got} samples, analysis needs at least {needed}")]
    ShortWaveform { needed: usize, got: usize },

    #[error("trajectory leaves the testbed at t = {t:.3} s: ({x:.3}, {y:.3}, {z:.3})")]
    OutOfBounds { t: f64, x: f64, y: f64, z: f64 },

    #[error("timestamps are not aligned at index {index}: {estimate} s vs {truth} s")]
    TimestampMismatch { index: usize, estimate: f64, truth: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
