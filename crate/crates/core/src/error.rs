use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),

    #[error("{name} must lie in [{lo}, {hi}], got {value}")]
    OutOfRange {
        name: &'static str,
        lo: f64,
        hi: f64,
        value: f64,
    },

    #[error("mean photon number must be finite and non-negative, got {0}")]
    InvalidMean(f64),

    #[error("vacuum photon-count pair carries no angle information")]
    VacuumCounts,

    #[error("no retained pulse produced a conclusive estimate on either side")]
    InsufficientAuthData,

    #[error("no sifted bits available for error-rate sampling")]
    EmptySiftedSet,

    #[error("MIM and normal error probabilities are indistinguishable (mim {mim} <= norm {norm})")]
    DegenerateMimDenominator { mim: f64, norm: f64 },

    #[error("invalid session config: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Range guard used by operations with stated numeric domains.
pub(crate) fn ensure_in_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            lo,
            hi,
            value,
        })
    }
}
