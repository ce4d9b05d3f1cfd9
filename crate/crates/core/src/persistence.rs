//! Lower bounds on the susceptible classes and a finite-horizon check of weak
//! persistence of the infected humans.

use crate::engine::{integrate, tail_stats, IntegrationSpec, SystemKind, TailStats};
use crate::equilibria::endemic_equilibrium;
use crate::error::{ModelError, Result};
use crate::model::{fmt_num, DomainFlag, HistorySegment, ModelParams, State};

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(ModelError::ThetaOutOfRange(theta))
    }
}

/// Bounds that hold eventually while `I_h` stays below `theta I_h*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceBounds {
    pub theta: f64,
    pub s_v_bar: f64,
    pub s_h_bar: f64,
}

impl PersistenceBounds {
    /// Both bounds strictly exceed the matching endemic components.
    pub fn dominates(&self, e_star: &State) -> bool {
        self.s_v_bar > e_star.s_v && self.s_h_bar > e_star.s_h
    }
}

pub fn persistence_bounds(p: &ModelParams, theta: f64) -> Result<PersistenceBounds> {
    let e = endemic_equilibrium(p).ok_or(ModelError::SubcriticalR0)?;
    check_theta(theta)?;
    let s_v_bar = p.beta_v / (theta * p.c_hv * e.i_h + p.mu_v);
    let s_h_bar = p.beta_h / (p.c_vh * (1.0 - s_v_bar / p.s_v0()) + p.mu_h);
    Ok(PersistenceBounds {
        theta,
        s_v_bar,
        s_h_bar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceReport {
    pub theta: f64,
    /// `theta * I_h*`.
    pub threshold: f64,
    pub i_h_tail_sup: f64,
    pub tail: TailStats,
    pub passes: bool,
}

impl PersistenceReport {
    pub fn key_values(&self) -> Vec<(String, String)> {
        self.key_values_with("persistence")
    }

    /// As [`Self::key_values`] with a custom key prefix.
    pub fn key_values_with(&self, prefix: &str) -> Vec<(String, String)> {
        let k = |s: &str| format!("{prefix}.{s}");
        vec![
            (k("theta"), fmt_num(self.theta)),
            (k("threshold"), fmt_num(self.threshold)),
            (k("i_h_tail_sup"), fmt_num(self.i_h_tail_sup)),
            (k("tail_inf"), self.tail.inf.to_string()),
            (k("tail_sup"), self.tail.sup.to_string()),
            (k("passes"), self.passes.to_string()),
        ]
    }
}

/// Integrates the full system from `phi` and compares the tail supremum of
/// `I_h` against `theta I_h*`.
pub fn weak_persistence_check(
    p: &ModelParams,
    phi: &HistorySegment,
    theta: f64,
    t_end: f64,
    window: f64,
) -> Result<PersistenceReport> {
    let p = p.validate()?;
    let e = endemic_equilibrium(&p).ok_or(ModelError::SubcriticalR0)?;
    check_theta(theta)?;
    if !DomainFlag::D.contains(phi, p.tau) {
        return Err(ModelError::NotInDomainD);
    }
    let traj = integrate(&p, phi, &IntegrationSpec::new(SystemKind::Full, t_end))?;
    let tail = tail_stats(&traj, window)?;
    let threshold = theta * e.i_h;
    let passes = tail.sup.i_h > threshold && tail.sup.to_array().iter().all(|&x| x > 0.0);
    Ok(PersistenceReport {
        theta,
        threshold,
        i_h_tail_sup: tail.sup.i_h,
        tail,
        passes,
    })
}
