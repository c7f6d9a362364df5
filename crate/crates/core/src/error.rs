use thiserror::Error;

/// Every failure mode of the library. The CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("particle count would exceed cap {cap} at time {time}")]
    Capacity { cap: usize, time: f64 },

    #[error("no particle with id {0}")]
    Lookup(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rejection budget exhausted after {attempts} attempts ({accepted} accepted)")]
    Budget { attempts: u64, accepted: u64 },

    #[error("truncation error: spine horizon {horizon} is below the required {required}")]
    Truncation { horizon: f64, required: f64 },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name, used in the CLI's JSON error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Grid(_) => "grid",
            Error::Parameter(_) => "parameter",
            Error::Precondition(_) => "precondition",
            Error::Configuration(_) => "configuration",
            Error::Capacity { .. } => "capacity",
            Error::Lookup(_) => "lookup",
            Error::Degenerate(_) => "degenerate",
            Error::Domain(_) => "domain",
            Error::Budget { .. } => "budget",
            Error::Truncation { .. } => "truncation",
            Error::Assembly(_) => "assembly",
            Error::Io(_) => "io",
            Error::Csv(_) => "io",
            Error::Json(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
