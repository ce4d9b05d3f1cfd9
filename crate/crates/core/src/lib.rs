//! Delayed vector-borne transmission model with standard incidence.
//!
//! The crate simulates the four-compartment delay system (humans and
//! mosquitoes, susceptible and infected), computes its threshold quantity and
//! steady states in closed form, classifies local stability from the
//! characteristic quasi-polynomials, and certifies global behaviour
//! numerically with Lyapunov functionals and tail statistics.

// range checks are written as `!(x > 0.0)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod defaults;
pub mod engine;
pub mod equilibria;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod persistence;
pub mod scenario;
pub mod spectral;

pub use engine::{integrate, tail_stats, IntegrationSpec, SystemKind, TailStats, Trajectory};
pub use equilibria::{basic_reproduction_number, EquilibriumSet};
pub use error::ModelError;
pub use model::{DomainFlag, HistorySegment, ModelParams, State};
