// SPDX-License-Identifier: Apache-2.0

//! Scenario files and their resolution into runnable sweeps.
//!
//! A scenario is a TOML document. Top-level parameter keys apply to every
//! curve; each `[[curve]]` table may override them. Command-line overrides
//! win over both.
//!
//! ```toml
//! name = "fig3a"
//! mode = "dephasing_only"   # closed | dephasing_only | relaxation_only | both
//! s_x = 0.1
//! s_y = 0.1
//!
//! [grid]
//! t_min = 3.0
//! t_max = 3000.0
//! points_per_decade = 16
//!
//! [[curve]]
//! label = "k=0, eta0=0.1"
//! k = 0
//! eta0 = 0.1
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use mzm_braid::analysis::{PowerLawFit, DEFAULT_WINDOW};
use mzm_braid::decoherence::DecoherenceParams;
use mzm_braid::dynamics::{DEFAULT_ABS_TOL, DEFAULT_MAX_STEPS, DEFAULT_REL_TOL};
use mzm_braid::schedule::{CouplingSchedule, SmoothnessOrder, Step};

pub const DEFAULT_T_MIN: f64 = 3.0;
pub const DEFAULT_T_MAX: f64 = 3000.0;
pub const DEFAULT_POINTS_PER_DECADE: f64 = 16.0;
pub const DEFAULT_COUPLING: f64 = 0.1;
pub const DEFAULT_FRINGE_SAMPLES: usize = 4;
/// Smallest accepted number of grid points.
pub const MIN_GRID_POINTS: usize = 16;

/// A configuration problem, naming the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    Closed,
    DephasingOnly,
    RelaxationOnly,
    Both,
}

impl Mode {
    fn forces_zero_eta0(self) -> bool {
        matches!(self, Mode::Closed | Mode::RelaxationOnly)
    }

    fn forces_zero_eta(self) -> bool {
        matches!(self, Mode::Closed | Mode::DephasingOnly)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Closed => "closed",
            Mode::DephasingOnly => "dephasing_only",
            Mode::RelaxationOnly => "relaxation_only",
            Mode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Finite,
    InfinitelySmooth,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Parameters {
    mode: Option<Mode>,
    profile: Option<ProfileKind>,
    k: Option<u32>,
    step: Option<u8>,
    eta0: Option<f64>,
    eta: Option<f64>,
    s_x: Option<f64>,
    s_y: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveTable {
    label: Option<String>,
    mode: Option<Mode>,
    profile: Option<ProfileKind>,
    k: Option<u32>,
    step: Option<u8>,
    eta0: Option<f64>,
    eta: Option<f64>,
    s_x: Option<f64>,
    s_y: Option<f64>,
}

impl CurveTable {
    fn parameters(&self) -> Parameters {
        Parameters {
            mode: self.mode,
            profile: self.profile,
            k: self.k,
            step: self.step,
            eta0: self.eta0,
            eta: self.eta,
            s_x: self.s_x,
            s_y: self.s_y,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridTable {
    t_min: Option<f64>,
    t_max: Option<f64>,
    points_per_decade: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegratorTable {
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisTable {
    window: Option<usize>,
    fringe_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputTable {
    csv: Option<PathBuf>,
    plot: Option<PathBuf>,
    fit: Option<PathBuf>,
    rates: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceTable {
    label: String,
    prefactor: Option<f64>,
    ln_prefactor: Option<f64>,
    exponent: f64,
    t_min: f64,
    t_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    title: Option<String>,
    mode: Option<Mode>,
    profile: Option<ProfileKind>,
    k: Option<u32>,
    step: Option<u8>,
    eta0: Option<f64>,
    eta: Option<f64>,
    s_x: Option<f64>,
    s_y: Option<f64>,
    #[serde(default)]
    grid: GridTable,
    #[serde(default)]
    integrator: IntegratorTable,
    #[serde(default)]
    analysis: AnalysisTable,
    #[serde(default)]
    output: OutputTable,
    #[serde(default)]
    curve: Vec<CurveTable>,
    #[serde(default)]
    reference: Vec<ReferenceTable>,
}

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub k: Option<u32>,
    pub eta0: Option<f64>,
    pub eta: Option<f64>,
    pub s_x: Option<f64>,
    pub s_y: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points_per_decade: Option<f64>,
    pub out_csv: Option<PathBuf>,
    pub out_plot: Option<PathBuf>,
    pub out_fit: Option<PathBuf>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
}

/// One fully resolved curve of a scenario.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub mode: Mode,
    pub schedule: CouplingSchedule,
    pub decoherence: DecoherenceParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: f64,
}

#[derive(Debug, Clone)]
pub struct Outputs {
    pub csv: PathBuf,
    pub plot: PathBuf,
    pub fit: PathBuf,
    pub rates: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ReferenceLine {
    pub label: String,
    pub fit: PowerLawFit,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub title: String,
    pub curves: Vec<Curve>,
    pub grid: GridSpec,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub window: usize,
    pub fringe_samples: usize,
    pub outputs: Outputs,
    pub references: Vec<ReferenceLine>,
}

/// Where a resolved value came from; command-line values may not be
/// silently discarded.
#[derive(Clone, Copy, PartialEq)]
enum Origin {
    File,
    Flag,
}

fn layered<T: Copy>(flag: Option<T>, curve: Option<T>, top: Option<T>) -> Option<(T, Origin)> {
    flag.map(|v| (v, Origin::Flag))
        .or(curve.map(|v| (v, Origin::File)))
        .or(top.map(|v| (v, Origin::File)))
}

impl Scenario {
    pub fn from_path(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = unknown_key(&message)
                .or_else(|| e.span().and_then(|span| key_at(text, span.start)))
                .unwrap_or_default();
            ConfigError::new(key, message)
        })?;
        resolve(file, overrides)
    }

    /// A single-curve scenario built from command-line values alone.
    pub fn from_overrides(overrides: &Overrides) -> Result<Self, ConfigError> {
        let file = ScenarioFile {
            name: "mzm-braid".into(),
            title: None,
            mode: None,
            profile: None,
            k: None,
            step: None,
            eta0: None,
            eta: None,
            s_x: None,
            s_y: None,
            grid: GridTable::default(),
            integrator: IntegratorTable::default(),
            analysis: AnalysisTable::default(),
            output: OutputTable::default(),
            curve: Vec::new(),
            reference: Vec::new(),
        };
        resolve(file, overrides)
    }

    pub fn grid_points(&self) -> Vec<f64> {
        mzm_braid::analysis::log_grid(self.grid.t_min, self.grid.t_max, self.grid.points_per_decade)
            .expect("grid validated during resolution")
    }
}

fn unknown_key(message: &str) -> Option<String> {
    let start = message.find("unknown field `")? + "unknown field `".len();
    let end = message[start..].find('`')?;
    Some(message[start..start + end].to_string())
}

/// The key assigned on the line containing byte offset `at`, if any.
fn key_at(text: &str, at: usize) -> Option<String> {
    let line_start = text[..at.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next()?;
    let (key, _) = line.split_once('=')?;
    let key = key.trim().trim_matches('"');
    (!key.is_empty() && !key.starts_with('[')).then(|| key.to_string())
}

fn resolve(file: ScenarioFile, o: &Overrides) -> Result<Scenario, ConfigError> {
    if file.name.trim().is_empty() {
        return Err(ConfigError::new("name", "must not be empty"));
    }
    let top = Parameters {
        mode: file.mode,
        profile: file.profile,
        k: file.k,
        step: file.step,
        eta0: file.eta0,
        eta: file.eta,
        s_x: file.s_x,
        s_y: file.s_y,
    };
    let tables = if file.curve.is_empty() {
        vec![CurveTable::default()]
    } else {
        file.curve.clone()
    };
    let curves = tables
        .iter()
        .enumerate()
        .map(|(i, table)| {
            let prefix = if file.curve.is_empty() {
                String::new()
            } else {
                format!("curve[{i}].")
            };
            resolve_curve(&top, table, o, &prefix)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let grid = GridSpec {
        t_min: o.t_min.or(file.grid.t_min).unwrap_or(DEFAULT_T_MIN),
        t_max: o.t_max.or(file.grid.t_max).unwrap_or(DEFAULT_T_MAX),
        points_per_decade: o
            .points_per_decade
            .or(file.grid.points_per_decade)
            .unwrap_or(DEFAULT_POINTS_PER_DECADE),
    };
    if !(grid.t_min > 0.0 && grid.t_min.is_finite()) {
        return Err(ConfigError::new("grid.t_min", "must be positive and finite"));
    }
    if !(grid.t_max > grid.t_min && grid.t_max.is_finite()) {
        return Err(ConfigError::new("grid.t_max", "empty T grid: t_max must exceed t_min"));
    }
    if !(grid.points_per_decade > 0.0 && grid.points_per_decade.is_finite()) {
        return Err(ConfigError::new("grid.points_per_decade", "must be positive"));
    }
    let points = mzm_braid::analysis::log_grid(grid.t_min, grid.t_max, grid.points_per_decade)
        .map_err(|e| ConfigError::new("grid", e.to_string()))?;
    if points.len() < MIN_GRID_POINTS {
        return Err(ConfigError::new(
            "grid",
            format!("needs at least {MIN_GRID_POINTS} points, got {}", points.len()),
        ));
    }

    let rel_tol = o.rel_tol.or(file.integrator.rel_tol).unwrap_or(DEFAULT_REL_TOL);
    let abs_tol = o.abs_tol.or(file.integrator.abs_tol).unwrap_or(DEFAULT_ABS_TOL);
    for (key, tol) in [("integrator.rel_tol", rel_tol), ("integrator.abs_tol", abs_tol)] {
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(ConfigError::new(key, "must lie in (0, 1e-3]"));
        }
    }
    let max_steps = file.integrator.max_steps.unwrap_or(DEFAULT_MAX_STEPS);
    if max_steps == 0 {
        return Err(ConfigError::new("integrator.max_steps", "must be positive"));
    }

    let window = file.analysis.window.unwrap_or(DEFAULT_WINDOW);
    if window < 5 || window.is_multiple_of(2) || window > points.len() {
        return Err(ConfigError::new(
            "analysis.window",
            format!("must be odd, at least 5 and at most the {} grid points", points.len()),
        ));
    }
    let fringe_samples = file.analysis.fringe_samples.unwrap_or(DEFAULT_FRINGE_SAMPLES);
    if fringe_samples == 0 {
        return Err(ConfigError::new("analysis.fringe_samples", "must be at least 1"));
    }

    let default_path = |ext: &str| PathBuf::from(format!("{}.{ext}", file.name));
    let outputs = Outputs {
        csv: o
            .out_csv
            .clone()
            .or(file.output.csv)
            .unwrap_or_else(|| default_path("csv")),
        plot: o
            .out_plot
            .clone()
            .or(file.output.plot)
            .unwrap_or_else(|| default_path("svg")),
        fit: o
            .out_fit
            .clone()
            .or(file.output.fit)
            .unwrap_or_else(|| default_path("fit.txt")),
        rates: file.output.rates,
    };

    let references = file
        .reference
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let key = |k: &str| format!("reference[{i}].{k}");
            let prefactor = match (r.prefactor, r.ln_prefactor) {
                (Some(c), None) => c,
                (None, Some(l)) => l.exp(),
                _ => {
                    return Err(ConfigError::new(
                        key("prefactor"),
                        "give exactly one of prefactor and ln_prefactor",
                    ))
                }
            };
            if !(prefactor > 0.0 && prefactor.is_finite()) {
                return Err(ConfigError::new(key("prefactor"), "must be positive"));
            }
            if !(r.t_min > 0.0 && r.t_max > r.t_min) {
                return Err(ConfigError::new(key("t_max"), "range must satisfy 0 < t_min < t_max"));
            }
            Ok(ReferenceLine {
                label: r.label.clone(),
                fit: PowerLawFit {
                    prefactor,
                    exponent: r.exponent,
                    t_min: r.t_min,
                    t_max: r.t_max,
                    r2: 1.0,
                    points: 0,
                },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Scenario {
        title: file.title.clone().unwrap_or_else(|| file.name.clone()),
        name: file.name,
        curves,
        grid,
        rel_tol,
        abs_tol,
        max_steps,
        window,
        fringe_samples,
        outputs,
        references,
    })
}

fn resolve_curve(top: &Parameters, table: &CurveTable, o: &Overrides, prefix: &str) -> Result<Curve, ConfigError> {
    let c = table.parameters();
    let key = |k: &str| format!("{prefix}{k}");
    let (mode, mode_origin) = layered(o.mode, c.mode, top.mode).unwrap_or((Mode::Both, Origin::File));

    let profile = c.profile.or(top.profile).unwrap_or(ProfileKind::Finite);
    let k = layered(o.k, c.k, top.k);
    let shape = match (profile, k) {
        (ProfileKind::Finite, Some((k, _))) => {
            CouplingSchedule::finite(SmoothnessOrder::new(k).map_err(|e| ConfigError::new(key("k"), e.to_string()))?)
        }
        (ProfileKind::Finite, None) => return Err(ConfigError::new(key("k"), "missing smoothness order")),
        (ProfileKind::InfinitelySmooth, Some((_, Origin::File))) => {
            return Err(ConfigError::new(key("k"), "not used by an infinitely smooth profile"))
        }
        (ProfileKind::InfinitelySmooth, _) => CouplingSchedule::infinitely_smooth(),
    };
    let step = match c.step.or(top.step).unwrap_or(1) {
        1 => Step::Step1,
        2 => Step::Step2,
        3 => Step::Step3,
        other => return Err(ConfigError::new(key("step"), format!("must be 1, 2 or 3, got {other}"))),
    };
    let schedule = shape.with_step(step);

    let rate =
        |name: &str, flag: Option<f64>, cv: Option<f64>, tv: Option<f64>, forced: bool| match layered(flag, cv, tv) {
            Some((v, origin)) if forced && v != 0.0 => {
                if origin == Origin::File && mode_origin == Origin::Flag {
                    Ok(0.0)
                } else {
                    Err(ConfigError::new(
                        key(name),
                        format!("must be 0 in {mode} mode, got {v}"),
                    ))
                }
            }
            Some((v, _)) => Ok(v),
            None => Ok(0.0),
        };
    let eta0 = rate("eta0", o.eta0, c.eta0, top.eta0, mode.forces_zero_eta0())?;
    let eta = rate("eta", o.eta, c.eta, top.eta, mode.forces_zero_eta())?;
    let s_x = o.s_x.or(c.s_x).or(top.s_x).unwrap_or(DEFAULT_COUPLING);
    let s_y = o.s_y.or(c.s_y).or(top.s_y).unwrap_or(DEFAULT_COUPLING);
    for (name, v) in [("eta0", eta0), ("eta", eta), ("s_x", s_x), ("s_y", s_y)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(ConfigError::new(key(name), format!("must be finite and >= 0, got {v}")));
        }
    }
    let decoherence =
        DecoherenceParams::new(eta0, eta, s_x, s_y).map_err(|e| ConfigError::new(key("eta0"), e.to_string()))?;

    let label = table.label.clone().unwrap_or_else(|| {
        let shape = match profile {
            ProfileKind::Finite => format!("k={}", k.map_or(0, |(k, _)| k)),
            ProfileKind::InfinitelySmooth => "k=inf".into(),
        };
        format!("{shape}, eta0={eta0}, eta={eta}")
    });
    Ok(Curve {
        label,
        mode,
        schedule,
        decoherence,
    })
}
