use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("series did not converge within {max_terms} terms ({what})")]
    SeriesNonConvergence { what: &'static str, max_terms: usize },

    #[error("truncation too small: neglected mass bound {bound:e} exceeds {tolerance:e}")]
    Truncation { bound: f64, tolerance: f64 },

    #[error("closed form is resonant ({0}); use the ODE integrator")]
    Resonance(String),

    #[error("operation requires time-homogeneous rates: {0}")]
    NotHomogeneous(String),

    #[error("ODE step size underflow at t = {t}")]
    StepSizeFailure { t: f64 },

    #[error("generator is ill-conditioned for spectral decomposition (condition {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

pub(crate) fn ensure_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be finite and non-negative, got {t}")))
    }
}
