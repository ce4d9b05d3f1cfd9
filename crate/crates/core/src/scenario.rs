//! Scenario and sweep files: JSON in, CSV tables and a `key = value` report out.
//!
//! A scenario looks like
//!
//! ```json
//! {
//!   "schema": 1,
//!   "params": { "beta_h": 2, "beta_v": 5, "mu_h": 0.5, "mu_v": 0.1,
//!               "c_vh": 0.2, "c_hv": 0.1, "tau": 1 },
//!   "history": { "constant": [3, 0.1, 30, 5] },
//!   "integration": { "t_end": 400 },
//!   "analyses": { "stability": true, "simulate": true, "lyapunov": true, "persistence": [0.9] },
//!   "output": { "dir": "out", "formats": ["csv", "report"] }
//! }
//! ```
//!
//! Omitted fields take the values in [`crate::defaults`]: `t_end = 40 / min(mu_h, mu_v)`,
//! 20 steps per delay, tail window 0.5, stability and simulation on, Lyapunov
//! and persistence off.

use std::fmt;
use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defaults;
use crate::engine::{integrate, tail_stats, IntegrationSpec, SystemKind, Trajectory};
use crate::equilibria::{r0_squared, EquilibriumSet};
use crate::error::ModelError;
use crate::lyapunov::{descend_check_with, FunctionalKind, LyapunovTrace};
use crate::model::{fmt_num, fmt_value, HistorySegment, ModelParams, State};
use crate::persistence::weak_persistence_check;
use crate::spectral::{classify, Equilibrium};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("{context}: {source}")]
    Model {
        context: &'static str,
        source: ModelError,
    },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

impl ScenarioError {
    /// 1 for unusable input, 2 for numerical failure or output trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Read { .. } | ScenarioError::Schema { .. } => 1,
            ScenarioError::Model { source, .. } if source.is_validation() => 1,
            ScenarioError::Model { .. } | ScenarioError::Write { .. } => 2,
        }
    }

    fn schema(location: impl Into<String>, message: impl fmt::Display) -> Self {
        ScenarioError::Schema {
            location: location.into(),
            message: message.to_string(),
        }
    }
}

fn model(context: &'static str) -> impl FnOnce(ModelError) -> ScenarioError {
    move |source| ScenarioError::Model { context, source }
}

/// Initial function as written in a scenario file. States are
/// `[S_h, I_h, S_v, I_v]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HistorySpec {
    Constant([f64; 4]),
    Table {
        times: Vec<f64>,
        states: Vec<[f64; 4]>,
    },
    /// Piecewise linear through `knots` equally spaced points on `[-tau, 0]`,
    /// each component drawn uniformly from `[low, high]`.
    Random {
        low: [f64; 4],
        high: [f64; 4],
        #[serde(default = "default_knots")]
        knots: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn default_knots() -> usize {
    5
}

impl HistorySpec {
    /// Builds the history for delay `tau`. `seed` overrides the file's seed.
    pub fn build(&self, tau: f64, seed: Option<u64>) -> Result<HistorySegment, ScenarioError> {
        let phi = match self {
            HistorySpec::Constant(s) => HistorySegment::constant(State::from_array(*s)),
            HistorySpec::Table { times, states } => HistorySegment::sampled(
                times.clone(),
                states.iter().map(|s| State::from_array(*s)).collect(),
            ),
            HistorySpec::Random {
                low,
                high,
                knots,
                seed: file_seed,
            } => {
                if low
                    .iter()
                    .zip(high)
                    .any(|(l, h)| !(0.0 <= *l && l <= h && h.is_finite()))
                {
                    return Err(ScenarioError::schema(
                        "history.random",
                        "need 0 <= low <= high, finite",
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.or(*file_seed).unwrap_or(0));
                random_history(&mut rng, low, high, *knots, tau)
            }
        };
        phi.validate(tau)
            .map_err(|e| ScenarioError::schema("history", e))?;
        Ok(phi)
    }
}

/// Piecewise-linear history through `knots` uniform draws on `[-tau, 0]`.
/// With `tau = 0` a single draw gives a constant history.
pub fn random_history<R: Rng>(
    rng: &mut R,
    low: &[f64; 4],
    high: &[f64; 4],
    knots: usize,
    tau: f64,
) -> HistorySegment {
    let mut draw = || {
        State::from_array(std::array::from_fn(|i| {
            if low[i] == high[i] {
                low[i]
            } else {
                rng.gen_range(low[i]..high[i])
            }
        }))
    };
    if tau == 0.0 {
        return HistorySegment::constant(draw());
    }
    let knots = knots.max(2);
    let times: Vec<f64> = (0..knots)
        .map(|j| {
            if j + 1 == knots {
                0.0
            } else {
                -tau + tau * j as f64 / (knots - 1) as f64
            }
        })
        .collect();
    let states = times.iter().map(|_| draw()).collect();
    HistorySegment::sampled(times, states)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    #[serde(default)]
    pub system: SystemKind,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_steps_per_delay")]
    pub steps_per_delay: usize,
    /// Step used when `tau = 0`.
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

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            system: SystemKind::Full,
            t_end: None,
            steps_per_delay: defaults::STEPS_PER_DELAY,
            step: None,
            record_stride: 1,
        }
    }
}

impl IntegrationConfig {
    pub fn to_spec(&self, p: &ModelParams) -> IntegrationSpec {
        IntegrationSpec {
            system: self.system,
            t_end: self.t_end.unwrap_or_else(|| defaults::default_t_end(p)),
            steps_per_delay: self.steps_per_delay,
            step: self.step,
            record_stride: self.record_stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    #[serde(default = "yes")]
    pub stability: bool,
    #[serde(default = "yes")]
    pub simulate: bool,
    #[serde(default)]
    pub lyapunov: bool,
    /// Thresholds `theta` for the weak-persistence check; empty skips it.
    #[serde(default)]
    pub persistence: Vec<f64>,
}

fn yes() -> bool {
    true
}

impl Default for Analyses {
    fn default() -> Self {
        Self {
            stability: true,
            simulate: true,
            lyapunov: false,
            persistence: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Report]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub params: ModelParams,
    pub history: HistorySpec,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub analyses: Analyses,
    /// Tail window as a fraction of the run.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_window() -> f64 {
    defaults::TAIL_WINDOW
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ScenarioError> {
    serde_json::from_str(text)
        .map_err(|e| ScenarioError::schema(format!("line {}, column {}", e.line(), e.column()), e))
}

fn read_file(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn check_schema_version(v: u32) -> Result<(), ScenarioError> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(ScenarioError::schema(
            "schema",
            format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
        ))
    }
}

fn check_params(p: &ModelParams, location: &str) -> Result<ModelParams, ScenarioError> {
    p.validate().map_err(|e| match e {
        ModelError::NonPositiveRate(name) => ScenarioError::schema(format!("{location}.{name}"), e),
        ModelError::NegativeDelay => ScenarioError::schema(format!("{location}.tau"), e),
        other => ScenarioError::schema(location, other),
    })
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let sc: Self = parse_json(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&read_file(path)?)
    }

    /// Checks everything that does not depend on a random seed.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        check_schema_version(self.schema)?;
        let p = check_params(&self.params, "params")?;
        if !(self.window > 0.0 && self.window < 1.0) {
            return Err(ScenarioError::schema(
                "window",
                ModelError::WindowOutOfRange(self.window),
            ));
        }
        self.integration
            .to_spec(&p)
            .mesh(&p)
            .map_err(|e| ScenarioError::schema("integration", e))?;
        if let Some(theta) = self
            .analyses
            .persistence
            .iter()
            .find(|t| !(**t > 0.0 && **t < 1.0))
        {
            return Err(ScenarioError::schema(
                "analyses.persistence",
                ModelError::ThetaOutOfRange(*theta),
            ));
        }
        Ok(())
    }
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn extend(&mut self, kv: Vec<(String, String)>) {
        self.entries.extend(kv);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Restricts a run to one analysis (plus the equilibria header).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Stability,
    Lyapunov,
    Persistence,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub only: Option<Section>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub trajectory: Option<Trajectory>,
    pub lyapunov: Option<LyapunovTrace>,
}

/// Runs the requested analyses in the order equilibria, stability,
/// simulation, Lyapunov, persistence.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<RunOutcome, ScenarioError> {
    sc.validate()?;
    let p = sc.params;
    let phi = sc.history.build(p.tau, opts.seed)?;
    let spec = sc.integration.to_spec(&p);
    let want = |section: Section, flag: bool| opts.only.map_or(flag, |o| o == section);

    let eq = EquilibriumSet::compute(&p);
    let mut report = Report::default();
    report.push("R0", fmt_num(eq.r0));
    report.push("E0", eq.e0.to_string());
    report.push(
        "EStar",
        eq.e_star.map_or("none".to_string(), |e| e.to_string()),
    );

    if want(Section::Stability, sc.analyses.stability) {
        report.extend(
            classify(&p, Equilibrium::E0)
                .map_err(model("stability of E0"))?
                .key_values(),
        );
        if eq.e_star.is_some() {
            report.extend(
                classify(&p, Equilibrium::EStar)
                    .map_err(model("stability of EStar"))?
                    .key_values(),
            );
        }
    }

    let mut trajectory = None;
    if opts.only.is_none() && sc.analyses.simulate {
        let traj = integrate(&p, &phi, &spec).map_err(model("simulation"))?;
        let tail = tail_stats(&traj, sc.window).map_err(model("simulation"))?;
        let tail_start = sc.window * traj.t_end();
        report.push(
            "simulate.system",
            format!("{:?}", spec.system).to_lowercase(),
        );
        report.push("simulate.t_end", fmt_num(traj.t_end()));
        report.push("simulate.step", fmt_num(traj.step()));
        report.push("simulate.nodes", traj.len().to_string());
        report.push("simulate.final_state", traj.final_state().to_string());
        report.push("simulate.tail_inf", tail.inf.to_string());
        report.push("simulate.tail_sup", tail.sup.to_string());
        report.push(
            "simulate.tail_dist_E0",
            fmt_value(traj.max_dist_from(&eq.e0, tail_start)),
        );
        if let Some(e) = eq.e_star {
            report.push(
                "simulate.tail_dist_EStar",
                fmt_value(traj.max_dist_from(&e, tail_start)),
            );
        }
        trajectory = Some(traj);
    }

    let mut lyapunov = None;
    if want(Section::Lyapunov, sc.analyses.lyapunov) {
        let kind = if r0_squared(&p) <= 1.0 {
            FunctionalKind::Vdfe
        } else {
            FunctionalKind::Vendemic
        };
        let trace = descend_check_with(&p, &phi, kind, &spec).map_err(model("lyapunov"))?;
        report.push("lyapunov.kind", kind.label());
        report.push("lyapunov.initial_value", fmt_value(trace.values[0]));
        report.push("lyapunov.final_value", fmt_value(trace.final_value()));
        report.push("lyapunov.max_increase", fmt_value(trace.max_increase));
        report.push("lyapunov.slack", fmt_value(trace.slack));
        report.push("lyapunov.descent", trace.certifies_descent().to_string());
        lyapunov = Some(trace);
    }

    let thetas = &sc.analyses.persistence;
    if want(Section::Persistence, !thetas.is_empty()) {
        if thetas.is_empty() {
            return Err(ScenarioError::schema(
                "analyses.persistence",
                "no theta values given",
            ));
        }
        let mut all = true;
        for &theta in thetas {
            let r = weak_persistence_check(&p, &phi, theta, spec.t_end, sc.window)
                .map_err(model("persistence"))?;
            all &= r.passes;
            if thetas.len() == 1 {
                report.extend(r.key_values());
            } else {
                report.extend(r.key_values_with(&format!("persistence[{}]", fmt_num(theta))));
            }
        }
        if thetas.len() > 1 {
            report.push("persistence.passes", all.to_string());
        }
    }

    Ok(RunOutcome {
        report,
        trajectory,
        lyapunov,
    })
}

fn write_file(
    path: PathBuf,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> Result<PathBuf, ScenarioError> {
    let result = fs::File::create(&path).and_then(|file| {
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        io::Write::flush(&mut w)
    });
    result
        .map(|_| path.clone())
        .map_err(|source| ScenarioError::Write { path, source })
}

/// Writes `trajectory.csv`, `lyapunov.csv` and `report.txt` into `dir` as far
/// as the outcome and `formats` allow. Returns the paths written.
pub fn write_outputs(
    outcome: &RunOutcome,
    dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>, ScenarioError> {
    fs::create_dir_all(dir).map_err(|source| ScenarioError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    if formats.contains(&Format::Csv) {
        if let Some(traj) = &outcome.trajectory {
            written.push(write_file(dir.join("trajectory.csv"), |w| {
                traj.write_csv(w)
            })?);
        }
        if let Some(trace) = &outcome.lyapunov {
            written.push(write_file(dir.join("lyapunov.csv"), |w| {
                trace.write_csv(w)
            })?);
        }
    }
    if formats.contains(&Format::Report) {
        written.push(write_file(dir.join("report.txt"), |w| {
            io::Write::write_all(w, outcome.report.to_string().as_bytes())
        })?);
    }
    Ok(written)
}

/// Derived quantities a sweep can tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    R0,
    /// Classification of both equilibria.
    Classification,
    #[serde(rename = "i_h_star")]
    IhStar,
    /// Tail infima and suprema of all four components.
    Tail,
}

impl Column {
    fn headers(&self) -> Vec<String> {
        match self {
            Column::R0 => vec!["R0".into()],
            Column::Classification => {
                vec!["E0.classification".into(), "EStar.classification".into()]
            }
            Column::IhStar => vec!["I_h*".into()],
            Column::Tail => ["tail_inf", "tail_sup"]
                .iter()
                .flat_map(|b| State::COMPONENTS.iter().map(move |c| format!("{b}.{c}")))
                .collect(),
        }
    }
}

fn default_columns() -> Vec<Column> {
    vec![Column::R0, Column::Classification, Column::IhStar]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema: u32,
    pub base: Scenario,
    /// A [`ModelParams`] field name.
    pub axis: String,
    pub values: Vec<f64>,
    #[serde(default = "default_columns")]
    pub columns: Vec<Column>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let spec: Self = parse_json(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&read_file(path)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        check_schema_version(self.schema)?;
        check_schema_version(self.base.schema)?;
        check_params(&self.base.params, "base.params")?;
        if self.base.params.get(&self.axis).is_none() {
            return Err(ScenarioError::schema(
                "axis",
                format!("unknown parameter `{}`", self.axis),
            ));
        }
        if self.values.is_empty() {
            return Err(ScenarioError::schema("values", "empty list"));
        }
        let ok = |v: f64| {
            v.is_finite()
                && if self.axis == "tau" {
                    v >= 0.0
                } else {
                    v > 0.0
                }
        };
        if let Some(v) = self.values.iter().find(|v| !ok(**v)) {
            return Err(ScenarioError::schema(
                "values",
                format!("{v} is not admissible for {}", self.axis),
            ));
        }
        if self.columns.is_empty() {
            return Err(ScenarioError::schema("columns", "empty list"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Cells in header order, or the error that stopped this row.
    pub cells: Result<Vec<String>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: String,
    pub headers: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column(&self, header: &str) -> Option<Vec<Option<&str>>> {
        let i = self.headers.iter().position(|h| h == header)?;
        Some(
            self.rows
                .iter()
                .map(|r| r.cells.as_ref().ok().map(|c| c[i].as_str()))
                .collect(),
        )
    }

    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{},{},error", self.axis, self.headers.join(","))?;
        for row in &self.rows {
            match &row.cells {
                Ok(cells) => writeln!(out, "{},{},", fmt_num(row.value), cells.join(","))?,
                Err(msg) => {
                    let blanks = ",".repeat(self.headers.len());
                    writeln!(
                        out,
                        "{}{blanks},\"{}\"",
                        fmt_num(row.value),
                        msg.replace('"', "\"\"")
                    )?
                }
            }
        }
        Ok(())
    }
}

fn sweep_row(
    spec: &SweepSpec,
    value: f64,
    seed: Option<u64>,
) -> Result<Vec<String>, ScenarioError> {
    let base = &spec.base;
    let p = base
        .params
        .with(&spec.axis, value)
        .expect("axis checked by validate");
    let p = check_params(&p, "params")?;
    let eq = EquilibriumSet::compute(&p);
    let mut cells = Vec::new();
    for col in &spec.columns {
        match col {
            Column::R0 => cells.push(fmt_num(eq.r0)),
            Column::Classification => {
                cells.push(
                    classify(&p, Equilibrium::E0)
                        .map_err(model("stability of E0"))?
                        .classification
                        .to_string(),
                );
                cells.push(match eq.e_star {
                    Some(_) => classify(&p, Equilibrium::EStar)
                        .map_err(model("stability of EStar"))?
                        .classification
                        .to_string(),
                    None => "none".into(),
                });
            }
            Column::IhStar => cells.push(eq.e_star.map_or("none".into(), |e| fmt_num(e.i_h))),
            Column::Tail => {
                let phi = base.history.build(p.tau, seed)?;
                let traj = integrate(&p, &phi, &base.integration.to_spec(&p))
                    .map_err(model("simulation"))?;
                let tail = tail_stats(&traj, base.window).map_err(model("simulation"))?;
                cells.extend(
                    tail.inf
                        .to_array()
                        .iter()
                        .chain(&tail.sup.to_array())
                        .map(|x| format!("{x:e}")),
                );
            }
        }
    }
    Ok(cells)
}

/// Evaluates every axis value independently, in parallel. Rows come back
/// sorted by axis value; a failing row carries its error message.
pub fn run_sweep(spec: &SweepSpec, seed: Option<u64>) -> Result<SweepTable, ScenarioError> {
    spec.validate()?;
    let mut values = spec.values.clone();
    values.sort_by(f64::total_cmp);
    let rows = values
        .par_iter()
        .map(|&value| SweepRow {
            value,
            cells: sweep_row(spec, value, seed).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepTable {
        axis: spec.axis.clone(),
        headers: spec.columns.iter().flat_map(Column::headers).collect(),
        rows,
    })
}

pub fn write_sweep(table: &SweepTable, dir: &Path) -> Result<PathBuf, ScenarioError> {
    fs::create_dir_all(dir).map_err(|source| ScenarioError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(dir.join("sweep.csv"), |w| table.write_csv(w))
}
