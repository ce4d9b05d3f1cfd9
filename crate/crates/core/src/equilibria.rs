//! Threshold quantity and steady states in closed form.

use crate::error::{ModelError, Result};
use crate::model::{ModelParams, State};

/// `R0^2 = C_vh C_hv beta_h / (mu_h^2 mu_v)`.
///
/// Threshold comparisons use this value directly so that `R0 = 1` is decided
/// without a square root in the way.
pub fn r0_squared(p: &ModelParams) -> f64 {
    p.c_vh * p.c_hv * p.beta_h / (p.mu_h * p.mu_h * p.mu_v)
}

/// Basic reproduction number. Independent of the delay.
pub fn basic_reproduction_number(p: &ModelParams) -> f64 {
    r0_squared(p).sqrt()
}

/// `E0 = (beta_h/mu_h, 0, beta_v/mu_v, 0)`.
pub fn disease_free_equilibrium(p: &ModelParams) -> State {
    State::new(p.s_h0(), 0.0, p.s_v0(), 0.0)
}

/// Unique positive steady state; `None` unless `R0 > 1`.
pub fn endemic_equilibrium(p: &ModelParams) -> Option<State> {
    let r2 = r0_squared(p);
    if r2 <= 1.0 {
        return None;
    }
    let excess = r2 - 1.0;
    let human_den = p.beta_h * p.c_hv + p.mu_v * p.mu_h * r2;
    let mosquito_den = p.c_vh * p.mu_v + p.mu_v * p.mu_h * r2;
    Some(State::new(
        p.beta_h * (p.c_hv * p.beta_h / p.mu_h + p.mu_v) / human_den,
        p.beta_h * p.mu_v * excess / human_den,
        p.beta_v * (p.c_vh + p.mu_h) / mosquito_den,
        p.beta_v * p.mu_h * excess / mosquito_den,
    ))
}

/// Largest absolute residual of the four steady-state equations at `s`.
///
/// Recruitment is written as `mu (S0 - S)`, so the residual at `E0` is exactly zero.
pub fn equilibrium_residual(p: &ModelParams, s: &State) -> Result<f64> {
    let n = s.n_v();
    if !(n > 0.0) {
        return Err(ModelError::ZeroMosquitoPopulation { t: f64::NAN });
    }
    let human_force = p.c_vh * s.i_v / n * s.s_h;
    let mosquito_force = p.c_hv * s.i_h * s.s_v;
    let r = [
        p.mu_h * (p.s_h0() - s.s_h) - human_force,
        human_force - p.mu_h * s.i_h,
        p.mu_v * (p.s_v0() - s.s_v) - mosquito_force,
        mosquito_force - p.mu_v * s.i_v,
    ];
    Ok(r.iter().fold(0.0, |m, x| m.max(x.abs())))
}

/// R0 together with both steady states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSet {
    pub r0: f64,
    pub e0: State,
    pub e_star: Option<State>,
}

impl EquilibriumSet {
    pub fn compute(p: &ModelParams) -> Self {
        Self {
            r0: basic_reproduction_number(p),
            e0: disease_free_equilibrium(p),
            e_star: endemic_equilibrium(p),
        }
    }
}
