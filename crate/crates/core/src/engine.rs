//! Fixed-step method-of-steps integrator for the full and limiting systems.
//!
//! With `tau > 0` the step is `h = tau / m`, so the delayed argument of the
//! first and last Runge-Kutta stages lands exactly on a mesh node `m` steps
//! back. The two midpoint stages need the solution halfway between nodes and
//! read it from the cubic Hermite interpolant built from stored node values
//! and derivatives, which keeps the scheme fourth order. Delayed arguments
//! that fall in `[-tau, 0]` are read from the initial function itself.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{ModelError, Result};
use crate::model::{rhs_full, rhs_limiting, Derivative, HistorySegment, ModelParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    #[default]
    Full,
    Limiting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    #[serde(default)]
    pub system: SystemKind,
    pub t_end: f64,
    /// Steps per delay interval, used when `tau > 0`.
    #[serde(default = "default_steps_per_delay")]
    pub steps_per_delay: usize,
    /// Step used when `tau = 0`; defaults to
    /// [`defaults::default_undelayed_step`].
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_steps_per_delay() -> usize {
    defaults::STEPS_PER_DELAY
}

fn default_stride() -> usize {
    1
}

impl IntegrationSpec {
    pub fn new(system: SystemKind, t_end: f64) -> Self {
        Self {
            system,
            t_end,
            steps_per_delay: defaults::STEPS_PER_DELAY,
            step: None,
            record_stride: 1,
        }
    }

    pub fn with_steps_per_delay(mut self, m: usize) -> Self {
        self.steps_per_delay = m;
        self
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = Some(h);
        self
    }

    /// Step size and delay lag (in steps) for the given parameters.
    pub fn mesh(&self, p: &ModelParams) -> Result<(f64, usize)> {
        let bad = |m: String| Err(ModelError::InvalidSpec(m));
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        let (h, lag) = if p.tau > 0.0 {
            if self.steps_per_delay == 0 {
                return bad("steps_per_delay must be at least 1".into());
            }
            (p.tau / self.steps_per_delay as f64, self.steps_per_delay)
        } else {
            let h = self
                .step
                .unwrap_or_else(|| defaults::default_undelayed_step(p));
            if !(h > 0.0) || !h.is_finite() {
                return bad(format!("step {h} must be positive"));
            }
            (h, 0)
        };
        if !(self.t_end >= h) || !self.t_end.is_finite() {
            return bad(format!(
                "t_end {} must be finite and at least one step ({h})",
                self.t_end
            ));
        }
        Ok((h, lag))
    }
}

/// Solution on a uniform mesh `t_k = k h`, together with its initial function.
#[derive(Debug, Clone)]
pub struct Trajectory {
    params: ModelParams,
    system: SystemKind,
    history: HistorySegment,
    step: f64,
    lag: usize,
    record_stride: usize,
    states: Vec<State>,
    derivs: Vec<Derivative>,
}

impl Trajectory {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn system(&self) -> SystemKind {
        self.system
    }

    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of steps spanned by the delay (0 for `tau = 0`).
    pub fn lag_steps(&self) -> usize {
        self.lag
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.states.len() - 1)
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn derivatives(&self) -> &[Derivative] {
        &self.derivs
    }

    pub fn final_state(&self) -> State {
        self.states[self.states.len() - 1]
    }

    /// `(t_k, x(t_k))` for every mesh node.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, State)> + '_ {
        self.states
            .iter()
            .enumerate()
            .map(|(k, s)| (self.time(k), *s))
    }

    /// Largest sup-norm distance to `target` over nodes with `t >= from`.
    pub fn max_dist_from(&self, target: &State, from: f64) -> f64 {
        self.nodes()
            .filter(|(t, _)| *t >= from)
            .fold(0.0, |m, (_, s)| m.max(s.dist(target)))
    }

    /// Solution value at any `t` in `[-tau, t_end]`: stored nodes are returned
    /// bit-exactly, cubic Hermite in between, and the initial function for
    /// `t < 0`.
    pub fn dense_eval(&self, t: f64) -> Result<State> {
        let t_end = self.t_end();
        if !(t >= -self.params.tau) || t > t_end || t.is_nan() {
            return Err(ModelError::OutOfRange(t));
        }
        if t < 0.0 {
            return Ok(self.history.eval(t));
        }
        let last = self.states.len() - 1;
        let k = ((t / self.step).floor() as usize).min(last);
        let s = (t - self.time(k)) / self.step;
        if s <= 0.0 || k == last {
            return Ok(self.states[k]);
        }
        Ok(hermite(
            &self.states[k],
            &self.derivs[k],
            &self.states[k + 1],
            &self.derivs[k + 1],
            self.step,
            s,
        ))
    }

    /// Writes `t,S_h,I_h,S_v,I_v` rows for every `record_stride`-th node and
    /// the final node, with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,S_h,I_h,S_v,I_v")?;
        let last = self.states.len() - 1;
        for (k, s) in self.states.iter().enumerate() {
            if k % self.record_stride == 0 || k == last {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.time(k),
                    s.s_h,
                    s.i_h,
                    s.s_v,
                    s.i_v
                )?;
            }
        }
        Ok(())
    }
}

fn hermite(y0: &State, d0: &State, y1: &State, d1: &State, h: f64, s: f64) -> State {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    *y0 * h00 + *d0 * (h10 * h) + *y1 * h01 + *d1 * (h11 * h)
}

struct Stepper<'a> {
    p: &'a ModelParams,
    system: SystemKind,
    history: &'a HistorySegment,
    h: f64,
    lag: usize,
    states: Vec<State>,
    derivs: Vec<Derivative>,
}

impl Stepper<'_> {
    fn field(&self, t: f64, now: &State, delayed: &State) -> Result<Derivative> {
        match self.system {
            SystemKind::Full => rhs_full(self.p, now, delayed).map_err(|e| match e {
                ModelError::ZeroMosquitoPopulation { .. } => {
                    ModelError::ZeroMosquitoPopulation { t }
                }
                other => other,
            }),
            SystemKind::Limiting => Ok(rhs_limiting(self.p, now, delayed)),
        }
    }

    /// State at `t_n + frac * h - tau` for `frac` in {0, 1/2, 1}; requires `lag > 0`.
    fn delayed(&self, n: usize, frac: f64) -> State {
        // node index of the left end of the delayed interval, possibly negative
        let j = n as isize - self.lag as isize;
        let s = (j as f64 + frac) * self.h;
        if s <= 0.0 {
            return self.history.eval(s);
        }
        let j = j as usize;
        if frac == 0.0 {
            self.states[j]
        } else if frac == 1.0 {
            self.states[j + 1]
        } else {
            hermite(
                &self.states[j],
                &self.derivs[j],
                &self.states[j + 1],
                &self.derivs[j + 1],
                self.h,
                frac,
            )
        }
    }

    /// Derivative at node `n` using the already-known delayed value.
    fn node_derivative(&self, n: usize) -> Result<Derivative> {
        let x = self.states[n];
        let t = n as f64 * self.h;
        let d = if self.lag == 0 {
            x
        } else {
            self.delayed(n, 0.0)
        };
        self.field(t, &x, &d)
    }

    fn advance(&mut self, n: usize) -> Result<State> {
        let h = self.h;
        let t = n as f64 * h;
        let x = self.states[n];
        let k1 = self.derivs[n];
        let y2 = x + k1 * (0.5 * h);
        let k2 = self.field(t + 0.5 * h, &y2, &self.delayed_or(n, 0.5, &y2))?;
        let y3 = x + k2 * (0.5 * h);
        let k3 = self.field(t + 0.5 * h, &y3, &self.delayed_or(n, 0.5, &y3))?;
        let y4 = x + k3 * h;
        let k4 = self.field(t + h, &y4, &self.delayed_or(n, 1.0, &y4))?;
        let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        clamp_small_negatives(next, t + h)
    }

    fn delayed_or(&self, n: usize, frac: f64, stage: &State) -> State {
        if self.lag == 0 {
            *stage
        } else {
            self.delayed(n, frac)
        }
    }
}

fn clamp_small_negatives(x: State, t: f64) -> Result<State> {
    let mut out = x.to_array();
    for (v, name) in out.iter_mut().zip(State::COMPONENTS) {
        if !v.is_finite() || *v < -defaults::CLAMP_BAND {
            return Err(ModelError::NegativityBreach {
                t,
                component: name,
                value: *v,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(State::from_array(out))
}

/// Integrates from the initial function `phi` over `[0, t_end]` with classical
/// fourth-order Runge-Kutta on the uniform mesh.
///
/// The mesh has `ceil(t_end / h)` steps, so the last node can sit up to one
/// step past the requested `t_end`.
pub fn integrate(
    p: &ModelParams,
    phi: &HistorySegment,
    spec: &IntegrationSpec,
) -> Result<Trajectory> {
    let p = p.validate()?;
    phi.validate(p.tau)?;
    let (h, lag) = spec.mesh(&p)?;
    let steps = ((spec.t_end / h) - 1e-9).ceil().max(1.0) as usize;

    let mut st = Stepper {
        p: &p,
        system: spec.system,
        history: phi,
        h,
        lag,
        states: Vec::with_capacity(steps + 1),
        derivs: Vec::with_capacity(steps + 1),
    };
    st.states.push(phi.at_zero());
    for n in 0..steps {
        let d = st.node_derivative(n)?;
        st.derivs.push(d);
        let next = st.advance(n)?;
        if !(next.n_v() > 0.0) {
            return Err(ModelError::ZeroMosquitoPopulation {
                t: (n + 1) as f64 * h,
            });
        }
        st.states.push(next);
    }
    let d = st.node_derivative(steps)?;
    st.derivs.push(d);

    Ok(Trajectory {
        params: p,
        system: spec.system,
        history: phi.clone(),
        step: h,
        lag,
        record_stride: spec.record_stride,
        states: st.states,
        derivs: st.derivs,
    })
}

/// Componentwise extrema over a trailing window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailStats {
    pub window: f64,
    pub inf: State,
    pub sup: State,
}

/// Extrema over nodes with `t >= window * t_end`.
pub fn tail_stats(traj: &Trajectory, window: f64) -> Result<TailStats> {
    if !(window > 0.0 && window < 1.0) {
        return Err(ModelError::WindowOutOfRange(window));
    }
    let start = window * traj.t_end();
    let mut tail = traj.nodes().filter(|(t, _)| *t >= start).map(|(_, s)| s);
    let first = tail.next().ok_or(ModelError::EmptyWindow)?;
    let (mut inf, mut sup, mut count) = (first, first, 1usize);
    for s in tail {
        inf = inf.zip_with(s, f64::min);
        sup = sup.zip_with(s, f64::max);
        count += 1;
    }
    if count < 2 {
        return Err(ModelError::EmptyWindow);
    }
    Ok(TailStats { window, inf, sup })
}

/// Result of a step-halving study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceEstimate {
    /// Sup-norm error of the `m` run against the `4m` reference.
    pub err_coarse: f64,
    /// Same for the `2m` run.
    pub err_fine: f64,
    /// `log2(err_coarse / err_fine)`; `None` when the errors are already at
    /// rounding level and carry no order information.
    pub order: Option<f64>,
}

/// Observed order of accuracy from runs with `m`, `2m` and `4m` steps per
/// delay, comparing on the coarse mesh nodes.
pub fn convergence_order(
    p: &ModelParams,
    phi: &HistorySegment,
    spec: &IntegrationSpec,
) -> Result<ConvergenceEstimate> {
    if !(p.tau > 0.0) {
        return Err(ModelError::InvalidSpec(
            "convergence study needs tau > 0".into(),
        ));
    }
    let m = spec.steps_per_delay;
    let run = |k: usize| integrate(p, phi, &spec.with_steps_per_delay(k * m));
    let (coarse, fine, reference) = (run(1)?, run(2)?, run(4)?);
    let err = |traj: &Trajectory, stride: usize| {
        coarse
            .states()
            .iter()
            .enumerate()
            .map(|(k, _)| traj.states()[k * stride].dist(&reference.states()[4 * k]))
            .fold(0.0, f64::max)
    };
    let err_coarse = err(&coarse, 1);
    let err_fine = err(&fine, 2);
    let order =
        if err_fine < defaults::EXACTNESS_THRESHOLD || err_coarse < defaults::EXACTNESS_THRESHOLD {
            None
        } else {
            Some((err_coarse / err_fine).log2())
        };
    Ok(ConvergenceEstimate {
        err_coarse,
        err_fine,
        order,
    })
}
