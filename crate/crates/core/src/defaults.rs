//! Defaults shared by the analyses and the scenario front end. Every value
//! here can be overridden per scenario.

use crate::model::ModelParams;

/// Integration steps per delay interval; the step is `tau / STEPS_PER_DELAY`.
pub const STEPS_PER_DELAY: usize = 20;

/// Upper bound on the step when `tau = 0`.
pub const MAX_UNDELAYED_STEP: f64 = 0.05;

/// With `tau = 0` the step is also capped at this over the largest rate.
pub const UNDELAYED_STEP_FACTOR: f64 = 0.1;

/// Negative overshoots no deeper than this are clamped to zero; deeper ones
/// abort the integration.
pub const CLAMP_BAND: f64 = 1e-9;

/// Fraction of the run at which the tail window starts.
pub const TAIL_WINDOW: f64 = 0.5;

/// Horizon multiplier: runs last `T_END_FACTOR / min(mu_h, mu_v)` by default.
pub const T_END_FACTOR: f64 = 40.0;

/// Absolute tolerance on lambda for the real-root bisection.
pub const BISECTION_TOL: f64 = 1e-12;

/// Grid points for the sign-change scan of the characteristic function.
pub const ROOT_SCAN_POINTS: usize = 10_000;

/// Half-width of the real interval searched for characteristic roots.
pub const ROOT_SEARCH_MAX: f64 = 10.0;

/// Relative slack allowed on a Lyapunov increment: `slack = LYAPUNOV_SLACK * (1 + |V(tau)|)`.
pub const LYAPUNOV_SLACK: f64 = 1e-7;

/// Errors below this are treated as exact and carry no order information.
pub const EXACTNESS_THRESHOLD: f64 = 1e-12;

pub fn default_t_end(p: &ModelParams) -> f64 {
    T_END_FACTOR / p.mu_h.min(p.mu_v)
}

pub fn default_undelayed_step(p: &ModelParams) -> f64 {
    MAX_UNDELAYED_STEP.min(UNDELAYED_STEP_FACTOR / p.max_rate())
}
