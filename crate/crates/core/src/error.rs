use thiserror::Error;

/// Errors raised by the model, the integrator and the analyses built on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("rate `{0}` must be strictly positive")]
    NonPositiveRate(&'static str),
    #[error("delay tau must be nonnegative")]
    NegativeDelay,
    #[error("total mosquito population is not positive (t = {t})")]
    ZeroMosquitoPopulation { t: f64 },
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("invalid integration spec: {0}")]
    InvalidSpec(String),
    #[error("component {component} fell below zero at t = {t} (value {value:e}); step too coarse")]
    NegativityBreach {
        t: f64,
        component: &'static str,
        value: f64,
    },
    #[error("time {0} lies outside the trajectory")]
    OutOfRange(f64),
    #[error("tail window holds fewer than two mesh nodes")]
    EmptyWindow,
    #[error("window fraction {0} must lie in (0, 1)")]
    WindowOutOfRange(f64),
    #[error("no sign change found on [0, {search_max}]")]
    NoBracket { search_max: f64 },
    #[error("endemic equilibrium does not exist (R0 <= 1)")]
    EndemicAbsent,
    #[error("argument {0} must be positive")]
    NonPositiveArgument(f64),
    #[error("window state at t = {t} lies outside Omega1 (S_h(0) > 0, S_v(0) > 0)")]
    OutsideOmega1 { t: f64 },
    #[error("window state at t = {t} lies outside Omega2 (all components > 0)")]
    OutsideOmega2 { t: f64 },
    #[error("I_v * S_h is not positive at t = {t}")]
    NonPositiveProduct { t: f64 },
    #[error("functional {kind} requires {requirement}")]
    RegimeMismatch {
        kind: &'static str,
        requirement: &'static str,
    },
    #[error("R0 must exceed 1 for this analysis")]
    SubcriticalR0,
    #[error("theta {0} must lie in (0, 1)")]
    ThetaOutOfRange(f64),
    #[error("initial function is not in D (needs I_h(0) > 0 and positive mosquito total)")]
    NotInDomainD,
}

impl ModelError {
    /// True for errors caused by invalid inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        use ModelError::*;
        matches!(
            self,
            NonPositiveRate(_)
                | NegativeDelay
                | InvalidHistory(_)
                | InvalidSpec(_)
                | WindowOutOfRange(_)
                | EndemicAbsent
                | NonPositiveArgument(_)
                | RegimeMismatch { .. }
                | SubcriticalR0
                | ThetaOutOfRange(_)
                | NotInDomainD
        )
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
