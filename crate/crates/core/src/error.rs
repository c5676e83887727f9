use thiserror::Error;

/// Errors produced across the stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("index out of range: {0}")]
    InvalidIndex(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate registration: {0}")]
    DegenerateRegistration(String),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("point at infinity")]
    PointAtInfinity,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("speed {0:.3} m/s is below the dynamic-model threshold")]
    LowSpeed(f64),
    #[error("localization lost: no usable pose source")]
    LocalizationLost,
    #[error("invalid track: {0}")]
    InvalidTrack(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid log: {0}")]
    InvalidLog(String),
    #[error("insufficient map: {0}")]
    InsufficientMap(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
