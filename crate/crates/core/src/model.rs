//! Parameters, phase-space points, initial functions and the two vector
//! fields (full system and its limiting system).
//!
//! Compartments are ordered `(S_h, I_h, S_v, I_v)` everywhere: susceptible and
//! infected humans, susceptible and infected mosquitoes. Time is measured in
//! days by convention; nothing in the math depends on the unit.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// The six transmission/demography rates plus the incubation delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Human recruitment (birth) rate.
    pub beta_h: f64,
    /// Mosquito recruitment (birth) rate.
    pub beta_v: f64,
    /// Human death rate.
    pub mu_h: f64,
    /// Mosquito death rate.
    pub mu_v: f64,
    /// Rate at which infected mosquitoes infect susceptible humans.
    pub c_vh: f64,
    /// Rate at which susceptible mosquitoes are infected by biting infected humans.
    pub c_hv: f64,
    /// Incubation delay.
    #[serde(default)]
    pub tau: f64,
}

impl ModelParams {
    pub const RATE_NAMES: [&'static str; 6] = ["beta_h", "beta_v", "mu_h", "mu_v", "c_vh", "c_hv"];

    pub fn new(
        beta_h: f64,
        beta_v: f64,
        mu_h: f64,
        mu_v: f64,
        c_vh: f64,
        c_hv: f64,
        tau: f64,
    ) -> Self {
        Self {
            beta_h,
            beta_v,
            mu_h,
            mu_v,
            c_vh,
            c_hv,
            tau,
        }
    }

    /// Returns the parameters unchanged when every rate is strictly positive
    /// and the delay is nonnegative.
    pub fn validate(self) -> Result<Self> {
        for (name, value) in Self::RATE_NAMES.iter().zip(self.rates()) {
            // `!(v > 0)` also rejects NaN
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::NonPositiveRate(name));
            }
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(ModelError::NegativeDelay);
        }
        Ok(self)
    }

    fn rates(&self) -> [f64; 6] {
        [
            self.beta_h,
            self.beta_v,
            self.mu_h,
            self.mu_v,
            self.c_vh,
            self.c_hv,
        ]
    }

    /// Largest of the six rates; sets the default step for the undelayed system.
    pub fn max_rate(&self) -> f64 {
        self.rates().into_iter().fold(0.0, f64::max)
    }

    /// Disease-free human population `beta_h / mu_h`.
    pub fn s_h0(&self) -> f64 {
        self.beta_h / self.mu_h
    }

    /// Disease-free mosquito population `beta_v / mu_v`, also the limit of `N_v`.
    pub fn s_v0(&self) -> f64 {
        self.beta_v / self.mu_v
    }

    /// Reads a field by its serialized name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "beta_h" => self.beta_h,
            "beta_v" => self.beta_v,
            "mu_h" => self.mu_h,
            "mu_v" => self.mu_v,
            "c_vh" => self.c_vh,
            "c_hv" => self.c_hv,
            "tau" => self.tau,
            _ => return None,
        })
    }

    /// Returns a copy with one field replaced, or `None` for an unknown name.
    pub fn with(&self, name: &str, value: f64) -> Option<Self> {
        let mut p = *self;
        match name {
            "beta_h" => p.beta_h = value,
            "beta_v" => p.beta_v = value,
            "mu_h" => p.mu_h = value,
            "mu_v" => p.mu_v = value,
            "c_vh" => p.c_vh = value,
            "c_hv" => p.c_hv = value,
            "tau" => p.tau = value,
            _ => return None,
        }
        Some(p)
    }
}

/// One point `(S_h, I_h, S_v, I_v)` of phase space.
///
/// The same shape carries time derivatives (see [`Derivative`]), which is why
/// nonnegativity is checked by the callers that need it rather than here.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub s_h: f64,
    pub i_h: f64,
    pub s_v: f64,
    pub i_v: f64,
}

/// Time derivative of a [`State`]; components may be negative.
pub type Derivative = State;

impl State {
    pub const COMPONENTS: [&'static str; 4] = ["S_h", "I_h", "S_v", "I_v"];

    pub const fn new(s_h: f64, i_h: f64, s_v: f64, i_v: f64) -> Self {
        Self { s_h, i_h, s_v, i_v }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s_h, self.i_h, self.s_v, self.i_v]
    }

    /// Total mosquito population.
    pub fn n_v(&self) -> f64 {
        self.s_v + self.i_v
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&x| x >= 0.0)
    }

    pub fn is_positive(&self) -> bool {
        self.to_array().iter().all(|&x| x > 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Sup-norm distance.
    pub fn dist(&self, other: &State) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        let [a, b, c, d] = self.to_array();
        Self::new(f(a), f(b), f(c), f(d))
    }

    pub fn zip_with(self, other: State, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(
            f(self.s_h, other.s_h),
            f(self.i_h, other.i_h),
            f(self.s_v, other.s_v),
            f(self.i_v, other.i_v),
        )
    }
}

impl Add for State {
    type Output = State;
    fn add(self, rhs: State) -> State {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, rhs: State) -> State {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, k: f64) -> State {
        self.map(|x| x * k)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            fmt_num(self.s_h),
            fmt_num(self.i_h),
            fmt_num(self.s_v),
            fmt_num(self.i_v)
        )
    }
}

/// [`fmt_num`] for moderate magnitudes, seven significant digits in
/// scientific notation for tiny or huge ones.
pub fn fmt_value(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        fmt_num(x)
    } else {
        format!("{x:.6e}")
    }
}

/// Six decimals with trailing zeros dropped: `35.000000` prints as `35`.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

/// Initial function on `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistorySegment {
    Constant(State),
    /// Samples at strictly increasing times from `-tau` to `0`, joined by
    /// straight lines.
    SampledTable {
        times: Vec<f64>,
        states: Vec<State>,
    },
}

const ENDPOINT_TOL: f64 = 1e-12;

impl HistorySegment {
    pub fn constant(s: State) -> Self {
        HistorySegment::Constant(s)
    }

    pub fn sampled(times: Vec<f64>, states: Vec<State>) -> Self {
        HistorySegment::SampledTable { times, states }
    }

    /// Checks the table layout against `tau`, componentwise nonnegativity and
    /// a positive mosquito total. Linear interpolation keeps both properties
    /// between samples, so checking the samples suffices.
    pub fn validate(&self, tau: f64) -> Result<()> {
        let bad = |msg: String| Err(ModelError::InvalidHistory(msg));
        match self {
            HistorySegment::Constant(s) => {
                if !s.is_nonnegative() || s.to_array().iter().any(|x| !x.is_finite()) {
                    return bad(format!(
                        "constant state {s} has a negative or non-finite component"
                    ));
                }
            }
            HistorySegment::SampledTable { times, states } => {
                if times.is_empty() || times.len() != states.len() {
                    return bad("times and states must be non-empty and of equal length".into());
                }
                if (times[0] + tau).abs() > ENDPOINT_TOL * (1.0 + tau)
                    || times[times.len() - 1].abs() > ENDPOINT_TOL * (1.0 + tau)
                {
                    return bad(format!("sample times must run from -tau = {} to 0", -tau));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("sample times must be strictly increasing".into());
                }
                if tau > 0.0 && times.len() < 2 {
                    return bad("a table needs at least two samples when tau > 0".into());
                }
                if let Some(s) = states.iter().find(|s| !s.is_nonnegative()) {
                    return bad(format!("sample {s} has a negative component"));
                }
            }
        }
        if !self.samples().all(|s| s.n_v() > 0.0) {
            return bad("mosquito total S_v + I_v must be positive on [-tau, 0]".into());
        }
        Ok(())
    }

    fn samples(&self) -> Box<dyn Iterator<Item = &State> + '_> {
        match self {
            HistorySegment::Constant(s) => Box::new(std::iter::once(s)),
            HistorySegment::SampledTable { states, .. } => Box::new(states.iter()),
        }
    }

    /// Value at `theta` in `[-tau, 0]`; arguments outside the table are clamped
    /// to its endpoints.
    pub fn eval(&self, theta: f64) -> State {
        match self {
            HistorySegment::Constant(s) => *s,
            HistorySegment::SampledTable { times, states } => {
                let n = times.len();
                if n == 1 || theta <= times[0] {
                    return states[0];
                }
                if theta >= times[n - 1] {
                    return states[n - 1];
                }
                // first index with times[k] > theta; k in 1..n
                let k = times.partition_point(|&t| t <= theta);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (theta - t0) / (t1 - t0);
                states[k - 1] * (1.0 - w) + states[k] * w
            }
        }
    }

    /// `phi(0)`.
    pub fn at_zero(&self) -> State {
        match self {
            HistorySegment::Constant(s) => *s,
            HistorySegment::SampledTable { states, .. } => states[states.len() - 1],
        }
    }
}

/// Admissible sets of initial functions, nested as `Omega2 ⊆ D ⊆ CPlus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainFlag {
    /// Nonnegative with a positive mosquito total everywhere.
    CPlus,
    /// `CPlus` with `I_h(0) > 0`; positively invariant.
    D,
    /// `CPlus` with every component of `phi(0)` positive.
    Omega2,
}

impl DomainFlag {
    pub fn contains(&self, phi: &HistorySegment, tau: f64) -> bool {
        if phi.validate(tau).is_err() {
            return false;
        }
        let now = phi.at_zero();
        match self {
            DomainFlag::CPlus => true,
            DomainFlag::D => now.i_h > 0.0,
            DomainFlag::Omega2 => now.is_positive(),
        }
    }
}

/// Right-hand side of the full model with standard incidence.
///
/// `delayed` is the state at `t - tau`; it only enters the `I_h` equation.
pub fn rhs_full(p: &ModelParams, now: &State, delayed: &State) -> Result<Derivative> {
    let n_now = now.n_v();
    let n_del = delayed.n_v();
    if !(n_now > 0.0) || !(n_del > 0.0) {
        return Err(ModelError::ZeroMosquitoPopulation { t: f64::NAN });
    }
    Ok(vector_field(p, now, delayed, n_now, n_del))
}

/// Right-hand side of the limiting system: both incidence denominators are
/// frozen at `S_v0 = beta_v / mu_v`.
pub fn rhs_limiting(p: &ModelParams, now: &State, delayed: &State) -> Derivative {
    let s_v0 = p.s_v0();
    vector_field(p, now, delayed, s_v0, s_v0)
}

#[inline]
fn vector_field(
    p: &ModelParams,
    now: &State,
    delayed: &State,
    n_now: f64,
    n_del: f64,
) -> Derivative {
    let human_infection = p.c_vh * (now.i_v / n_now) * now.s_h;
    let delayed_infection = p.c_vh * (delayed.i_v / n_del) * delayed.s_h;
    let mosquito_infection = p.c_hv * now.i_h * now.s_v;
    State::new(
        p.beta_h - human_infection - p.mu_h * now.s_h,
        delayed_infection - p.mu_h * now.i_h,
        p.beta_v - mosquito_infection - p.mu_v * now.s_v,
        mosquito_infection - p.mu_v * now.i_v,
    )
}
