use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the simulator can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("numerology alignment: {0}")]
    Alignment(String),
    #[error("sample rate mismatch: {0}")]
    Rate(String),
    #[error("invalid numerology: {0}")]
    Numerology(String),
    #[error("subcarrier count: {0}")]
    Count(String),
    #[error("tap profile: {0}")]
    Profile(String),
    #[error("array geometry: {0}")]
    Geometry(String),
    #[error("frequency {freq_hz} Hz outside the band of +/-{nyquist_hz} Hz")]
    Band { freq_hz: f64, nyquist_hz: f64 },
    #[error("resampling factor must be >= 1, got {0}")]
    Factor(usize),
    #[error("resampler: {0}")]
    Resampler(String),
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("channel has zero norm")]
    ZeroChannel,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("length mismatch: {0}")]
    Length(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
