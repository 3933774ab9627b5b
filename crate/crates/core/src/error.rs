use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("ancillary circuit R·G^(m-1) is undefined for m = 0")]
    AncillaryUndefined,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("beta = {beta} is off the admissible branch (a bracket factor is negative)")]
    OutOfBranch { beta: f64 },

    #[error("implicit derivative is singular at beta = 0")]
    SingularDerivative,

    #[error("Fisher information diverges in slot {slot}: boundary probability")]
    DivergentInformation { slot: usize },

    #[error("theta is not identifiable: Schur complement {0} is not positive")]
    NotIdentifiable(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            lo,
            hi,
        })
    }
}
