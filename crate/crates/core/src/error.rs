use thiserror::Error;

/// Errors raised by the library. Numerical step failures inside the
/// construction are data (ledger rows), not errors.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("continued fraction of {alpha} truncated at depth {reached} (requested {requested}): remainder below working precision")]
    Truncated {
        alpha: f64,
        requested: usize,
        reached: usize,
    },

    #[error("tower level {level} needs convergent {needed}, expansion only has {available}")]
    LevelOutOfRange {
        level: usize,
        needed: usize,
        available: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid [{lo}, {hi}] does not cover the support [{need_lo}, {need_hi}]")]
    GridCoverage {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("malformed {what}: {reason}")]
    Parse { what: &'static str, reason: String },

    #[error("seeding failed: {0}")]
    Seeding(String),

    #[error("no smoothing size met the bound 1/{m} within [{eps_lo}, {eps_hi}]")]
    NoSmoothingScale { m: usize, eps_lo: f64, eps_hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn parse(what: &'static str, reason: impl ToString) -> Self {
        LabError::Parse {
            what,
            reason: reason.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
