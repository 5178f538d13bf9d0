use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("invalid weight density: {0}")]
    InvalidWeight(String),

    #[error("argument {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("threshold h0 = {h0} outside [h_min, h_max] = [{h_min}, {h_max}]")]
    Range { h0: f64, h_min: f64, h_max: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("calibration impossible: {0}")]
    CalibrationImpossible(String),

    #[error("ill-posed risk: design density {density:e} at x = {x} is below the floor")]
    IllPosedRisk { x: f64, density: f64 },

    #[error("underdetermined fit: n = {n} observations for k = {k} coefficients")]
    Underdetermined { n: usize, k: usize },

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite replication result (seed {seed}, stream {stream})")]
    NonFinite { seed: u64, stream: u64 },

    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("internal: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by bad input rather than a numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Config(_))
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
