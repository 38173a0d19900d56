use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} = {value} is outside its domain ({domain})")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    Length {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("device index {index} out of range for {len} devices")]
    DeviceIndex { index: usize, len: usize },
    #[error("inclusion probabilities sum to {sum}, expected {expected}")]
    InclusionSum { sum: f64, expected: usize },
    #[error("participant set is empty")]
    NoParticipants,
    #[error("rate parameter theta = {theta} gives delay {delay} s above the target {t_max} s")]
    InfeasibleTheta { theta: f64, delay: f64, t_max: f64 },
    #[error("per-round delay {delay} s exceeds the target {t_max} s")]
    InfeasibleDelay { delay: f64, t_max: f64 },
    #[error("every participant is below the truncation threshold")]
    AllTruncated,
    #[error("device {device} transmits {power} W above the budget {p_max} W")]
    PowerViolation { device: usize, power: f64, p_max: f64 },
    #[error("learning rate {eta} violates the convergence hypothesis (max {max})")]
    LearningRate { eta: f64, max: f64 },
    #[error("device {device} gradient norm {norm} exceeds the assumed bound {gamma}")]
    GradientBound { device: usize, norm: f64, gamma: f64 },
    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },
}

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "> 0",
        })
    }
}

pub(crate) fn nonnegative(name: &'static str, value: f64) -> Result<f64> {
    finite(name, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: ">= 0",
        })
    }
}

pub(crate) fn unit_interval(name: &'static str, value: f64) -> Result<f64> {
    finite(name, value)?;
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "(0, 1]",
        })
    }
}

pub(crate) fn same_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Length {
            what,
            expected,
            found,
        })
    }
}
