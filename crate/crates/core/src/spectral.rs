//! Local stability of the two steady states.
//!
//! Linearizing at either steady state gives a characteristic function that
//! factors as `(lambda + mu_h)(lambda + mu_v) G(lambda)` with
//!
//! ```text
//! G(lambda) = lambda^2 + a1 lambda + a2 + a3 exp(-lambda tau)
//! ```
//!
//! Stability is decided in closed form: a Routh-Hurwitz test for `tau = 0`,
//! and for `tau > 0` an exclusion test for roots on the imaginary axis via the
//! quartic `w^4 + (a1^2 - 2 a2) w^2 + (a2^2 - a3^2) = 0`. The rightmost real
//! root is located numerically as supporting evidence.

use num_complex::Complex64;

use crate::defaults;
use crate::equilibria::{endemic_equilibrium, r0_squared, EquilibriumSet};
use crate::error::{ModelError, Result};
use crate::model::{fmt_value, ModelParams, State};

/// `G(lambda) = lambda^2 + a1 lambda + a2 + a3 exp(-lambda tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiPolynomial {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub tau: f64,
}

impl QuasiPolynomial {
    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        lambda * lambda + lambda * self.a1 + self.a2 + (-lambda * self.tau).exp() * self.a3
    }

    pub fn eval_real(&self, lambda: f64) -> f64 {
        lambda * lambda + self.a1 * lambda + self.a2 + self.a3 * (-lambda * self.tau).exp()
    }

    /// Coefficients `(A, B)` of the quartic `w^4 + A w^2 + B` whose nonnegative
    /// roots are the only candidates for roots `i w` of `G`.
    pub fn imaginary_axis_quartic(&self) -> (f64, f64) {
        (
            self.a1 * self.a1 - 2.0 * self.a2,
            self.a2 * self.a2 - self.a3 * self.a3,
        )
    }
}

/// Anything that reduces to a characteristic quasi-polynomial.
pub trait CharacteristicCoeffs {
    fn quasi_polynomial(&self) -> QuasiPolynomial;
}

/// Coefficients at the disease-free state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfeCharCoeffs {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub tau: f64,
}

impl DfeCharCoeffs {
    pub fn new(p: &ModelParams) -> Self {
        let u1 = p.c_hv * p.beta_v / p.mu_v;
        let u2 = p.c_vh * p.beta_h * p.mu_v / (p.beta_v * p.mu_h);
        Self {
            q1: p.mu_h + p.mu_v,
            q2: p.mu_v * p.mu_h,
            q3: -u1 * u2,
            tau: p.tau,
        }
    }
}

impl CharacteristicCoeffs for DfeCharCoeffs {
    fn quasi_polynomial(&self) -> QuasiPolynomial {
        QuasiPolynomial {
            a1: self.q1,
            a2: self.q2,
            a3: self.q3,
            tau: self.tau,
        }
    }
}

/// Coefficients at the endemic state, with the intermediate Jacobian entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndemicCharCoeffs {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub tau: f64,
}

impl EndemicCharCoeffs {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let e = endemic_equilibrium(p).ok_or(ModelError::EndemicAbsent)?;
        let n = e.n_v();
        let m1 = p.c_vh * e.i_v / n;
        let m2 = p.c_vh * e.i_v * e.s_h / (n * n);
        let m3 = p.c_vh * e.s_v * e.s_h / (n * n);
        let m4 = p.c_hv * e.s_v;
        let m5 = p.c_hv * e.i_h;
        Ok(Self {
            m1,
            m2,
            m3,
            m4,
            m5,
            p1: p.mu_h + m1 + p.mu_v + m5,
            p2: (p.mu_h + m1) * (p.mu_v + m5),
            p3: -m4 * (m3 + m2),
            tau: p.tau,
        })
    }
}

impl CharacteristicCoeffs for EndemicCharCoeffs {
    fn quasi_polynomial(&self) -> QuasiPolynomial {
        QuasiPolynomial {
            a1: self.p1,
            a2: self.p2,
            a3: self.p3,
            tau: self.tau,
        }
    }
}

pub fn char_eval(coeffs: &impl CharacteristicCoeffs, lambda: Complex64) -> Complex64 {
    coeffs.quasi_polynomial().eval(lambda)
}

/// Routh-Hurwitz for the undelayed quadratic `lambda^2 + a1 lambda + (a2 + a3)`.
pub fn routh_hurwitz_tau0(coeffs: &impl CharacteristicCoeffs) -> bool {
    let g = coeffs.quasi_polynomial();
    g.a1 > 0.0 && g.a2 + g.a3 > 0.0
}

/// Whether the imaginary-axis quartic admits a root `w >= 0`.
///
/// With `z = w^2` the quartic is `z^2 + A z + B`; it has a root `z >= 0`
/// exactly when `B <= 0`, or when `A < 0` and the discriminant is nonnegative.
pub fn imaginary_axis_root_exists(coeffs: &impl CharacteristicCoeffs) -> bool {
    let (a, b) = coeffs.quasi_polynomial().imaginary_axis_quartic();
    b <= 0.0 || (a < 0.0 && a * a - 4.0 * b >= 0.0)
}

/// Bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Rightmost real root of `G` within `[-search_max, search_max]`.
///
/// If `G(0) < 0` a positive root must exist since `G -> inf`; it is
/// bracketed by doubling from 1 and refined by bisection. Otherwise the
/// interval is scanned on a fixed grid and every sign change is refined.
pub fn rightmost_real_root(
    coeffs: &impl CharacteristicCoeffs,
    search_max: f64,
) -> Result<Option<f64>> {
    if !(search_max > 0.0) {
        return Err(ModelError::InvalidSpec(format!(
            "search_max {search_max} must be positive"
        )));
    }
    let g = coeffs.quasi_polynomial();
    let f = |x: f64| g.eval_real(x);
    let tol = defaults::BISECTION_TOL;
    if f(0.0) < 0.0 {
        let mut s = 1.0f64.min(search_max);
        while f(s) <= 0.0 {
            if s >= search_max {
                return Err(ModelError::NoBracket { search_max });
            }
            s = (2.0 * s).min(search_max);
        }
        return Ok(Some(bisect(f, 0.0, s, tol)));
    }

    let n = defaults::ROOT_SCAN_POINTS;
    let grid = |k: usize| -search_max + 2.0 * search_max * k as f64 / (n - 1) as f64;
    let mut best: Option<f64> = if f(0.0) == 0.0 { Some(0.0) } else { None };
    let mut prev = (grid(0), f(grid(0)));
    for k in 1..n {
        let x = grid(k);
        let fx = f(x);
        let root = if fx == 0.0 {
            Some(x)
        } else if prev.1 != 0.0 && (prev.1 < 0.0) != (fx < 0.0) {
            Some(bisect(f, prev.0, x, tol))
        } else {
            None
        };
        if let Some(r) = root {
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
        prev = (x, fx);
    }
    Ok(best)
}

/// Linearization of the full system at `at`: current-state Jacobian and
/// delayed-state Jacobian.
pub fn linearization(p: &ModelParams, at: &State) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let n = at.n_v();
    let n2 = n * n;
    let c = p.c_vh;
    // partials of c * (i_v / n_v) * s_h
    let d_sh = c * at.i_v / n;
    let d_sv = -c * at.i_v * at.s_h / n2;
    let d_iv = c * at.s_v * at.s_h / n2;
    let now = [
        [-d_sh - p.mu_h, 0.0, -d_sv, -d_iv],
        [0.0, -p.mu_h, 0.0, 0.0],
        [0.0, -p.c_hv * at.s_v, -p.c_hv * at.i_h - p.mu_v, 0.0],
        [0.0, p.c_hv * at.s_v, p.c_hv * at.i_h, -p.mu_v],
    ];
    let delayed = [[0.0; 4], [d_sh, 0.0, d_sv, d_iv], [0.0; 4], [0.0; 4]];
    (now, delayed)
}

/// `det(lambda I - J - K exp(-lambda tau))` for the linearization at `at`.
pub fn characteristic_determinant(p: &ModelParams, at: &State, lambda: Complex64) -> Complex64 {
    let (j, k) = linearization(p, at);
    let decay = (-lambda * p.tau).exp();
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for col in 0..4 {
            let diag = if r == col {
                lambda
            } else {
                Complex64::new(0.0, 0.0)
            };
            m[r][col] = diag - j[r][col] - decay * k[r][col];
        }
    }
    determinant4(m)
}

#[allow(clippy::needless_range_loop)]
fn determinant4(mut m: [[Complex64; 4]; 4]) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
            .unwrap();
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..4 {
            let factor = m[r][col] / m[col][col];
            for c in col..4 {
                let sub = factor * m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    det
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equilibrium {
    E0,
    EStar,
}

impl Equilibrium {
    pub fn label(&self) -> &'static str {
        match self {
            Equilibrium::E0 => "E0",
            Equilibrium::EStar => "EStar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Locally asymptotically stable.
    Las,
    Unstable,
    /// `R0 = 1`: a zero root, no local claim.
    Critical,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Las => "LAS",
            Classification::Unstable => "Unstable",
            Classification::Critical => "Critical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub which: Equilibrium,
    pub r0: f64,
    pub classification: Classification,
    pub coefficients: QuasiPolynomial,
    pub routh_hurwitz_tau0: bool,
    /// Quartic test for `tau > 0`; for `tau = 0` whether `lambda = 0` is a root,
    /// the only way the quadratic can touch the axis while `a1 > 0`.
    pub imag_axis_root_exists: bool,
    pub rightmost_real_root: Option<f64>,
    /// The two explicit roots `(-mu_h, -mu_v)` split off from the full equation.
    pub factor_roots: (f64, f64),
}

impl StabilityReport {
    /// Whether the numerical evidence agrees with the classification.
    pub fn evidence_consistent(&self) -> bool {
        let root = self.rightmost_real_root;
        match self.classification {
            Classification::Las => {
                !self.imag_axis_root_exists
                    && (self.coefficients.tau > 0.0 || self.routh_hurwitz_tau0)
                    && root.is_none_or(|r| r < 0.0)
            }
            Classification::Unstable => root.is_some_and(|r| r > 0.0),
            Classification::Critical => {
                self.coefficients.a2 + self.coefficients.a3 == 0.0
                    || root.is_some_and(|r| r.abs() < 1e-9)
            }
        }
    }

    /// `key = value` pairs, keys prefixed with the equilibrium label.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let k = |s: &str| format!("{}.{s}", self.which.label());
        let g = &self.coefficients;
        vec![
            (k("classification"), self.classification.to_string()),
            (k("a1"), fmt_value(g.a1)),
            (k("a2"), fmt_value(g.a2)),
            (k("a3"), fmt_value(g.a3)),
            (k("routh_hurwitz_tau0"), self.routh_hurwitz_tau0.to_string()),
            (
                k("imag_axis_root_exists"),
                self.imag_axis_root_exists.to_string(),
            ),
            (
                k("rightmost_real_root"),
                self.rightmost_real_root
                    .map_or("none".to_string(), fmt_value),
            ),
            (
                k("factor_roots"),
                format!("({}, {})", self.factor_roots.0, self.factor_roots.1),
            ),
            (
                k("evidence_consistent"),
                self.evidence_consistent().to_string(),
            ),
        ]
    }
}

/// Classifies `which` and gathers the closed-form and numerical evidence.
pub fn classify(p: &ModelParams, which: Equilibrium) -> Result<StabilityReport> {
    let p = p.validate()?;
    let r2 = r0_squared(&p);
    let (g, classification) = match which {
        Equilibrium::E0 => {
            let class = if r2 < 1.0 {
                Classification::Las
            } else if r2 > 1.0 {
                Classification::Unstable
            } else {
                Classification::Critical
            };
            (DfeCharCoeffs::new(&p).quasi_polynomial(), class)
        }
        Equilibrium::EStar => (
            EndemicCharCoeffs::new(&p)?.quasi_polynomial(),
            Classification::Las,
        ),
    };
    let imag = if p.tau > 0.0 {
        imaginary_axis_root_exists(&g)
    } else {
        g.a2 + g.a3 == 0.0
    };
    Ok(StabilityReport {
        which,
        r0: EquilibriumSet::compute(&p).r0,
        classification,
        coefficients: g,
        routh_hurwitz_tau0: routh_hurwitz_tau0(&g),
        imag_axis_root_exists: imag,
        rightmost_real_root: rightmost_real_root(&g, defaults::ROOT_SEARCH_MAX)?,
        factor_roots: (-p.mu_h, -p.mu_v),
    })
}

impl CharacteristicCoeffs for QuasiPolynomial {
    fn quasi_polynomial(&self) -> QuasiPolynomial {
        *self
    }
}
