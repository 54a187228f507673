use thiserror::Error;

/// Errors raised by the model, pricing and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument outside the admissible domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fit failed at index {index}: {reason}")]
    Fit { index: usize, reason: String },

    #[error("ordering violated at index {index}: {reason}")]
    Ordering { index: usize, reason: String },

    #[error("inconsistent curve data: {0}")]
    Consistency(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("tenor dates not aligned: {0}")]
    Alignment(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("negative initial spread at index {index}: {value}")]
    SpreadSign { index: usize, value: f64 },

    #[error("integration did not converge: {0}")]
    Integration(String),

    #[error("price outside no-arbitrage bounds: {0}")]
    Bounds(String),

    #[error("exercise boundary: {0}")]
    Boundary(String),

    #[error("driver not supported here: {0}")]
    UnsupportedDriver(String),

    #[error("degenerate quantity: {0}")]
    Degenerate(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short kebab-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Fit { .. } => "fit",
            Error::Ordering { .. } => "ordering",
            Error::Consistency(_) => "consistency",
            Error::Index(_) => "index",
            Error::Alignment(_) => "alignment",
            Error::Layout(_) => "layout",
            Error::SpreadSign { .. } => "spread-sign",
            Error::Integration(_) => "integration",
            Error::Bounds(_) => "bounds",
            Error::Boundary(_) => "boundary",
            Error::UnsupportedDriver(_) => "unsupported-driver",
            Error::Degenerate(_) => "degenerate",
            Error::Calibration(_) => "calibration",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::InvalidParameter(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
