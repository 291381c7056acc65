use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} must be a positive finite length, got {value}")]
    InvalidDimension { name: &'static str, value: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("code is empty")]
    EmptyCode,
    #[error("code contains non-binary symbol {0:?}")]
    InvalidSymbol(char),
    #[error("code length {0} is below the minimum of 2")]
    CodeTooShort(usize),
    #[error("phase-shifted pattern needs at least one cycle")]
    ZeroCycles,
    #[error("observed pattern is empty")]
    EmptyObservation,
    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),
    #[error("observed length {got} does not match codebook length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("stream contains no reference transitions")]
    NoReferenceEvents,
    #[error("invalid frame stream: {0}")]
    InvalidStream(String),
    #[error("operation requires a phase-shifted pattern")]
    NotPhaseShifted,
    #[error("no candidate width satisfies v_max = {v_max} mm/s at {rate_hz} Hz")]
    NoFeasibleWidth { v_max: f64, rate_hz: f64 },
    #[error("invalid design spec: {0}")]
    InvalidSpec(String),
    #[error("invalid sweep plan: {0}")]
    InvalidPlan(String),
    #[error("accuracy map is empty")]
    EmptyMap,
    #[error("invalid pattern document: {0}")]
    InvalidPattern(String),
    #[error("malformed export: {0}")]
    MalformedExport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable identifier used in JSON error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDimension { .. } => "InvalidDimension",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::EmptyCode => "EmptyCode",
            Error::InvalidSymbol(_) => "InvalidSymbol",
            Error::CodeTooShort(_) => "CodeTooShort",
            Error::ZeroCycles => "ZeroCycles",
            Error::EmptyObservation => "EmptyObservation",
            Error::InvalidCodebook(_) => "InvalidCodebook",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::NoReferenceEvents => "NoReferenceEvents",
            Error::InvalidStream(_) => "InvalidStream",
            Error::NotPhaseShifted => "NotPhaseShifted",
            Error::NoFeasibleWidth { .. } => "NoFeasibleWidth",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::InvalidPlan(_) => "InvalidPlan",
            Error::EmptyMap => "EmptyMap",
            Error::InvalidPattern(_) => "InvalidPattern",
            Error::MalformedExport(_) => "MalformedExport",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
