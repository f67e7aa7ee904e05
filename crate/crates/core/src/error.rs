use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error(
        "atom {index:?} sits {separation:.3e} um from the communication atom (floor {floor} um)"
    )]
    Singularity {
        index: Option<usize>,
        separation: f64,
        floor: f64,
    },

    #[error("quadrature did not converge for {what}: relative change {change:.3e} > {tol:.1e}")]
    Quadrature {
        what: &'static str,
        change: f64,
        tol: f64,
    },

    #[error("step size underflow at t = {t:.6} us (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {max_steps} steps at t = {t:.6} us")]
    StepLimit { t: f64, max_steps: usize },

    #[error("energy hierarchy violated: {0}")]
    Hierarchy(String),

    #[error("spin-wave bin {bin} of {n_bins} is empty")]
    EmptyBin { bin: usize, n_bins: usize },

    #[error("polar angle undefined: zero separation from the quantization axis origin")]
    UndefinedAngle,

    #[error("state is not normalized (norm {0:.6})")]
    Normalization(f64),

    #[error("config: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(
            name,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

pub(crate) fn require_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(
            name,
            format!("must be non-negative and finite, got {value}"),
        ))
    }
}

pub(crate) fn require_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::domain(
            name,
            format!("must lie in [0, 1], got {value}"),
        ))
    }
}
