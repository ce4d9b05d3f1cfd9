//! Lyapunov functionals for the limiting system and a discrete descent check.
//!
//! Both functionals are evaluated on solution segments `y_t(theta) = y(t + theta)`
//! sampled on the integration mesh; the delay integral is a Simpson sum over
//! those same nodes.

use std::io::{self, Write};

use crate::defaults;
use crate::engine::{integrate, IntegrationSpec, SystemKind, Trajectory};
use crate::equilibria::{endemic_equilibrium, r0_squared};
use crate::error::{ModelError, Result};
use crate::model::{HistorySegment, ModelParams, State};

/// `F(x) = 1 - x + ln x`, nonpositive with its only zero at `x = 1`.
pub fn f_bridge(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(ModelError::NonPositiveArgument(x));
    }
    Ok(1.0 - x + x.ln())
}

/// `r (v/r - 1 - ln(v/r))` computed without cancellation near `v = r`.
fn log_excess(value: f64, reference: f64) -> f64 {
    let d = (value - reference) / reference;
    reference * (d - d.ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    /// Centred at the disease-free state; defined when `S_h(0), S_v(0) > 0`.
    Vdfe,
    /// Centred at the endemic state; defined when every component of `y(0)` is positive.
    Vendemic,
}

impl FunctionalKind {
    pub fn label(&self) -> &'static str {
        match self {
            FunctionalKind::Vdfe => "Vdfe",
            FunctionalKind::Vendemic => "Vendemic",
        }
    }
}

/// A solution segment on `[t - tau, t]`, sampled uniformly with spacing `step`.
/// The last sample is the state at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub t: f64,
    pub step: f64,
    pub samples: Vec<State>,
}

impl Window {
    /// Segment ending at mesh node `k`. Nodes before `t = 0` are read from the
    /// initial function.
    pub fn from_trajectory(traj: &Trajectory, k: usize) -> Self {
        let lag = traj.lag_steps() as isize;
        let samples = (0..=lag)
            .map(|j| {
                let idx = k as isize - lag + j;
                if idx >= 0 {
                    traj.states()[idx as usize]
                } else {
                    traj.history().eval(idx as f64 * traj.step())
                }
            })
            .collect();
        Self {
            t: traj.time(k),
            step: traj.step(),
            samples,
        }
    }

    /// Constant segment of length `tau` sampled at `intervals + 1` points.
    pub fn constant(state: State, tau: f64, intervals: usize) -> Self {
        let intervals = if tau > 0.0 { intervals.max(1) } else { 0 };
        Self {
            t: 0.0,
            step: if intervals == 0 {
                0.0
            } else {
                tau / intervals as f64
            },
            samples: vec![state; intervals + 1],
        }
    }

    pub fn now(&self) -> State {
        self.samples[self.samples.len() - 1]
    }

    /// Composite Simpson over the samples, closing an odd interval count
    /// with a three-eighths panel. A single interval falls back to the
    /// trapezoid rule.
    fn quadrature(&self, f: impl Fn(&State) -> f64) -> f64 {
        let v: Vec<f64> = self.samples.iter().map(f).collect();
        let n = v.len() - 1;
        let h = self.step;
        match n {
            0 => 0.0,
            1 => 0.5 * h * (v[0] + v[1]),
            _ => {
                let simpson_end = if n.is_multiple_of(2) { n } else { n - 3 };
                let mut acc = 0.0;
                for i in (0..simpson_end).step_by(2) {
                    acc += h / 3.0 * (v[i] + 4.0 * v[i + 1] + v[i + 2]);
                }
                if simpson_end < n {
                    let i = simpson_end;
                    acc += 3.0 * h / 8.0 * (v[i] + 3.0 * v[i + 1] + 3.0 * v[i + 2] + v[i + 3]);
                }
                acc
            }
        }
    }
}

/// Functional centred at `E0`.
pub fn v_dfe(p: &ModelParams, w: &Window) -> Result<f64> {
    let now = w.now();
    if !(now.s_h > 0.0 && now.s_v > 0.0) {
        return Err(ModelError::OutsideOmega1 { t: w.t });
    }
    let mosquito_weight = p.mu_v * p.mu_h / (p.c_hv * p.beta_v);
    let v1 = log_excess(now.s_h, p.s_h0())
        + now.i_h
        + mosquito_weight * log_excess(now.s_v, p.s_v0())
        + mosquito_weight * now.i_v;
    let k = p.mu_v / p.beta_v * p.c_vh;
    Ok(v1 + w.quadrature(|s| k * s.i_v * s.s_h))
}

/// Functional centred at `E*`; requires `R0 > 1`.
pub fn v_endemic(p: &ModelParams, w: &Window) -> Result<f64> {
    let e = endemic_equilibrium(p).ok_or(ModelError::EndemicAbsent)?;
    let now = w.now();
    if !now.is_positive() {
        return Err(ModelError::OutsideOmega2 { t: w.t });
    }
    let n = w.samples.len();
    for (j, s) in w.samples.iter().enumerate() {
        if !(s.i_v * s.s_h > 0.0) {
            return Err(ModelError::NonPositiveProduct {
                t: w.t - (n - 1 - j) as f64 * w.step,
            });
        }
    }
    let mosquito_weight = p.mu_h * e.i_h / (p.mu_v * e.i_v);
    let v2 = log_excess(now.s_h, e.s_h)
        + log_excess(now.i_h, e.i_h)
        + mosquito_weight * (log_excess(now.s_v, e.s_v) + log_excess(now.i_v, e.i_v));
    // the integrand reference mu_h I_h* beta_v / (mu_v C_vh) equals I_v* S_h*
    let flux_ref = p.beta_v * p.mu_h * e.i_h / (p.mu_v * p.c_vh);
    let integral = w.quadrature(|s| log_excess(s.i_v * s.s_h, flux_ref) / flux_ref);
    Ok(v2 + p.mu_h * e.i_h * integral)
}

pub fn evaluate(kind: FunctionalKind, p: &ModelParams, w: &Window) -> Result<f64> {
    match kind {
        FunctionalKind::Vdfe => v_dfe(p, w),
        FunctionalKind::Vendemic => v_endemic(p, w),
    }
}

/// Values of a functional along a limiting-system trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    pub kind: FunctionalKind,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest `V(t_{k+1}) - V(t_k)` over consecutive samples.
    pub max_increase: f64,
    /// Tolerated increase, `LYAPUNOV_SLACK * (1 + |V(tau)|)`.
    pub slack: f64,
}

impl LyapunovTrace {
    pub fn certifies_descent(&self) -> bool {
        self.max_increase <= self.slack
    }

    pub fn final_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,V")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Checks that the functional is in its regime and the initial function in
/// its domain.
fn check_admissible(p: &ModelParams, phi: &HistorySegment, kind: FunctionalKind) -> Result<()> {
    let now = phi.at_zero();
    match kind {
        FunctionalKind::Vdfe => {
            if r0_squared(p) > 1.0 {
                return Err(ModelError::RegimeMismatch {
                    kind: "Vdfe",
                    requirement: "R0 <= 1",
                });
            }
            if !(now.s_h > 0.0 && now.s_v > 0.0) {
                return Err(ModelError::OutsideOmega1 { t: 0.0 });
            }
        }
        FunctionalKind::Vendemic => {
            if r0_squared(p) <= 1.0 {
                return Err(ModelError::RegimeMismatch {
                    kind: "Vendemic",
                    requirement: "R0 > 1",
                });
            }
            if !now.is_positive() {
                return Err(ModelError::OutsideOmega2 { t: 0.0 });
            }
        }
    }
    Ok(())
}

/// Integrates the limiting system from `phi` with default resolution and
/// records the functional at every node with `t >= tau`.
pub fn descend_check(
    p: &ModelParams,
    phi: &HistorySegment,
    kind: FunctionalKind,
    t_end: f64,
) -> Result<LyapunovTrace> {
    descend_check_with(
        p,
        phi,
        kind,
        &IntegrationSpec::new(SystemKind::Limiting, t_end),
    )
}

/// As [`descend_check`] with an explicit mesh. The system is forced to
/// [`SystemKind::Limiting`].
pub fn descend_check_with(
    p: &ModelParams,
    phi: &HistorySegment,
    kind: FunctionalKind,
    spec: &IntegrationSpec,
) -> Result<LyapunovTrace> {
    check_admissible(p, phi, kind)?;
    let spec = IntegrationSpec {
        system: SystemKind::Limiting,
        ..*spec
    };
    let traj = integrate(p, phi, &spec)?;
    trace_along(&traj, kind)
}

/// Functional values at every node of `traj` from `t = tau` on.
pub fn trace_along(traj: &Trajectory, kind: FunctionalKind) -> Result<LyapunovTrace> {
    let p = traj.params();
    let first = traj.lag_steps();
    let mut times = Vec::with_capacity(traj.len() - first);
    let mut values = Vec::with_capacity(traj.len() - first);
    for k in first..traj.len() {
        let w = Window::from_trajectory(traj, k);
        values.push(evaluate(kind, p, &w)?);
        times.push(w.t);
    }
    let max_increase = values
        .windows(2)
        .map(|v| v[1] - v[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = defaults::LYAPUNOV_SLACK * (1.0 + values[0].abs());
    Ok(LyapunovTrace {
        kind,
        times,
        values,
        max_increase,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::disease_free_equilibrium;

    fn p1() -> ModelParams {
        ModelParams::new(2.0, 5.0, 0.5, 0.1, 0.2, 0.1, 1.0)
    }

    fn p2() -> ModelParams {
        ModelParams {
            c_vh: 0.05,
            c_hv: 0.05,
            ..p1()
        }
    }

    #[test]
    fn bridge_function_values() {
        assert_eq!(f_bridge(1.0).unwrap(), 0.0);
        assert!(
            (f_bridge(std::f64::consts::E).unwrap() - (2.0 - std::f64::consts::E)).abs() < 1e-15
        );
        assert!((f_bridge(std::f64::consts::E).unwrap() + 0.718282).abs() < 1e-6);
        assert_eq!(f_bridge(0.0), Err(ModelError::NonPositiveArgument(0.0)));
        assert!(f_bridge(-1.0).is_err());
        for x in [1e-6, 0.3, 0.999, 1.001, 7.0, 1e6] {
            assert!(f_bridge(x).unwrap() < 0.0);
        }
    }

    #[test]
    fn dfe_functional_values() {
        let e0 = disease_free_equilibrium(&p2());
        assert_eq!(v_dfe(&p2(), &Window::constant(e0, 1.0, 20)).unwrap(), 0.0);
        let w = Window::constant(State::new(4.0, 1.0, 50.0, 10.0), 1.0, 20);
        assert!((v_dfe(&p2(), &w).unwrap() - 3.04).abs() < 1e-12);
        let w = Window::constant(State::new(3.0, 0.0, 60.0, 0.0), 1.0, 20);
        assert!(v_dfe(&p2(), &w).unwrap() > 0.0);
        let w = Window::constant(State::new(0.0, 1.0, 60.0, 0.0), 1.0, 20);
        assert!(matches!(
            v_dfe(&p2(), &w),
            Err(ModelError::OutsideOmega1 { .. })
        ));
    }

    #[test]
    fn endemic_functional_values() {
        let e = endemic_equilibrium(&p1()).unwrap();
        assert!(
            v_endemic(&p1(), &Window::constant(e, 1.0, 20))
                .unwrap()
                .abs()
                < 1e-14
        );

        let psi = State::new(e.s_h, e.i_h, e.s_v, 2.0 * e.i_v);
        let got = v_endemic(&p1(), &Window::constant(psi, 1.0, 20)).unwrap();
        // direct evaluation: only the I_v terms survive
        let p = p1();
        let x: f64 = 2.0;
        let weight = p.mu_h * e.i_h / (p.mu_v * e.i_v);
        let point = weight * (psi.i_v - e.i_v - e.i_v * x.ln());
        let big_x = p.mu_v * p.c_vh * psi.i_v * psi.s_h / (p.beta_v * p.mu_h * e.i_h);
        let integral = p.mu_h * e.i_h * 1.0 * (big_x - 1.0 - big_x.ln());
        assert!(got > 0.0);
        assert!(
            (got - (point + integral)).abs() < 1e-12,
            "{got} vs {}",
            point + integral
        );

        let w = Window::constant(State::new(e.s_h, 0.0, e.s_v, e.i_v), 1.0, 20);
        assert!(matches!(
            v_endemic(&p1(), &w),
            Err(ModelError::OutsideOmega2 { .. })
        ));
        let mut w = Window::constant(e, 1.0, 4);
        w.samples[1].i_v = 0.0;
        assert!(matches!(
            v_endemic(&p1(), &w),
            Err(ModelError::NonPositiveProduct { .. })
        ));
    }

    #[test]
    fn descent_to_disease_free_state() {
        let phi = HistorySegment::constant(State::new(4.0, 1.0, 50.0, 10.0));
        let tr = descend_check(&p2(), &phi, FunctionalKind::Vdfe, 200.0).unwrap();
        assert!(tr.certifies_descent(), "{} > {}", tr.max_increase, tr.slack);
        assert!(tr.final_value() < 1e-3);
        assert_eq!(tr.times[0], 1.0);
    }

    #[test]
    fn descent_to_endemic_state() {
        let phi = HistorySegment::constant(State::new(3.0, 1.0, 30.0, 5.0));
        let tr = descend_check(&p1(), &phi, FunctionalKind::Vendemic, 400.0).unwrap();
        assert!(tr.certifies_descent(), "{} > {}", tr.max_increase, tr.slack);
        assert!(tr.final_value() < 1e-3);
    }

    #[test]
    fn constant_endemic_trace_is_zero() {
        let e = endemic_equilibrium(&p1()).unwrap();
        let tr = descend_check(
            &p1(),
            &HistorySegment::constant(e),
            FunctionalKind::Vendemic,
            20.0,
        )
        .unwrap();
        assert!(tr.values.iter().all(|v| v.abs() < 1e-12));
        assert!(tr.certifies_descent());
    }

    #[test]
    fn regime_and_domain_are_enforced() {
        let phi = HistorySegment::constant(State::new(3.0, 1.0, 30.0, 5.0));
        assert!(matches!(
            descend_check(&p1(), &phi, FunctionalKind::Vdfe, 10.0),
            Err(ModelError::RegimeMismatch { .. })
        ));
        assert!(matches!(
            descend_check(&p2(), &phi, FunctionalKind::Vendemic, 10.0),
            Err(ModelError::RegimeMismatch { .. })
        ));
        let phi = HistorySegment::constant(State::new(3.0, 0.0, 30.0, 5.0));
        assert!(matches!(
            descend_check(&p1(), &phi, FunctionalKind::Vendemic, 10.0),
            Err(ModelError::OutsideOmega2 { .. })
        ));
    }

    #[test]
    fn critical_threshold_still_descends() {
        let p = ModelParams::new(1.0, 5.0, 1.0, 0.25, 0.5, 0.5, 1.0);
        let phi = HistorySegment::constant(State::new(0.5, 0.5, 15.0, 5.0));
        let tr = descend_check(&p, &phi, FunctionalKind::Vdfe, 100.0).unwrap();
        assert!(tr.certifies_descent());
    }

    #[test]
    fn quadrature_is_mesh_consistent() {
        let phi = HistorySegment::constant(State::new(3.0, 1.0, 30.0, 5.0));
        let spec = IntegrationSpec::new(SystemKind::Limiting, 30.0).with_steps_per_delay(20);
        let coarse = descend_check_with(&p1(), &phi, FunctionalKind::Vendemic, &spec).unwrap();
        let fine = descend_check_with(
            &p1(),
            &phi,
            FunctionalKind::Vendemic,
            &spec.with_steps_per_delay(40),
        )
        .unwrap();
        for (k, v) in coarse.values.iter().enumerate() {
            let w = fine.values[2 * k];
            assert!(
                (v - w).abs() <= 1e-6 * w.abs().max(1e-12),
                "t={} {v} {w}",
                coarse.times[k]
            );
        }
    }

    #[test]
    fn infected_vector_coefficient_factors_through_r0() {
        for p in [p1(), p2()] {
            let grouped = p.beta_h * p.mu_v * p.c_vh / (p.mu_h * p.beta_v)
                - p.mu_v * p.mu_v * p.mu_h / (p.c_hv * p.beta_v);
            let closed = p.mu_v * p.mu_v * p.mu_h * (r0_squared(&p) - 1.0) / (p.c_hv * p.beta_v);
            assert!((grouped - closed).abs() < 1e-15);
        }
    }

    #[test]
    fn trace_csv() {
        let phi = HistorySegment::constant(State::new(4.0, 1.0, 50.0, 10.0));
        let tr = descend_check(&p2(), &phi, FunctionalKind::Vdfe, 2.0).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,V\n"));
        assert_eq!(text.lines().count(), tr.values.len() + 1);
    }
}
