use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    /// The sideband comb truncated at `n_max` loses more than 1e-9 of the power.
    #[error("insufficient n_max: {n_max} sidebands at beta = {beta} leave {tail:e} of the power outside the comb")]
    InsufficientOrder { beta: f64, n_max: usize, tail: f64 },

    #[error("overmodulation: drive envelope depth {depth} exceeds 1")]
    Overmodulation { depth: f64 },

    #[error("quadrature did not converge: estimate {estimate_re:e}{estimate_im:+e}i, last relative change {rel_change:e}")]
    QuadratureNotConverged {
        estimate_re: f64,
        estimate_im: f64,
        rel_change: f64,
    },

    #[error("insufficient samples: need at least {min_duration_s:.6} s ({min_samples} samples) for 4 averaged segments")]
    InsufficientSamples {
        min_samples: usize,
        min_duration_s: f64,
    },

    #[error("sample count {requested} exceeds the limit of {limit}")]
    SampleOverflow { requested: f64, limit: usize },

    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Scenario parse or validation failure. `line` is 1-based; 0 means the
/// problem is not tied to one line (e.g. a missing section).
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}{message}", if *.line > 0 { format!("line {}: ", .line) } else { String::new() })]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_positive(value: f64, name: &'static str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
