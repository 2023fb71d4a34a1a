// SPDX-License-Identifier: Apache-2.0

//! Executes a resolved scenario and writes its artifacts.

use std::fmt::{self, Write as _};
use std::path::Path;

use mzm_braid::analysis::{
    fit_plateaus, format_fit_report, scaling_regimes, sweep, write_series_csv, PointStatus, RegimeReport,
    ScalingSeries, SweepOptions,
};
use mzm_braid::decoherence::rates;
use mzm_braid::dynamics::{SimConfig, PE_FLOOR};
use mzm_braid::io::{format_float, write_csv};
use mzm_braid::plot::{write_svg, FitOverlay};
use mzm_braid::Error;

use crate::scenario::{ConfigError, Scenario};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Config = 1,
    Integration = 2,
    Io = 3,
}

#[derive(Debug)]
pub struct RunError {
    pub status: ExitStatus,
    pub message: String,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self {
            status: ExitStatus::Config,
            message: e.to_string(),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } | Error::Csv { .. } => ExitStatus::Io,
            Error::Integration { .. }
            | Error::SweepFailed
            | Error::Accuracy { .. }
            | Error::Singularity
            | Error::RankDeficient => ExitStatus::Integration,
            _ => ExitStatus::Config,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub keep_going: bool,
}

#[derive(Debug, Clone)]
pub struct CurveResult {
    pub series: ScalingSeries,
    pub regimes: RegimeReport,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub curves: Vec<CurveResult>,
    pub failed_points: usize,
    pub fit_report: String,
}

/// Sweeps every curve, then writes the CSV, fit report, plot and optional
/// rate table.
///
/// Artifacts are written even when some points failed; the failure is
/// reported afterwards unless `keep_going` is set.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<RunReport, RunError> {
    let grid = scenario.grid_points();
    let sweep_options = SweepOptions {
        jobs: options.jobs,
        fringe_samples: scenario.fringe_samples,
    };
    let mut curves = Vec::with_capacity(scenario.curves.len());
    for curve in &scenario.curves {
        let mut cfg = SimConfig::new(grid[0], curve.schedule, curve.decoherence)
            .with_tolerances(scenario.rel_tol, scenario.abs_tol);
        cfg.max_steps = scenario.max_steps;
        let series = sweep(curve.label.clone(), &cfg, &grid, &sweep_options)?;
        let series = if series.usable().count() >= scenario.window {
            series.with_local_exponents(scenario.window)?
        } else {
            series
        };
        let regimes = scaling_regimes(&series.local_exponents);
        curves.push(CurveResult { series, regimes });
    }

    let failed: Vec<(String, f64, String)> = curves
        .iter()
        .flat_map(|c| {
            c.series.points.iter().filter_map(move |p| match &p.status {
                PointStatus::Failed(reason) => Some((c.series.label.clone(), p.duration, reason.clone())),
                _ => None,
            })
        })
        .collect();

    let mut overlays = Vec::new();
    let mut report = String::new();
    let _ = writeln!(report, "scenario: {}", scenario.name);
    let _ = writeln!(
        report,
        "grid: T in [{}, {}] at {} points per decade; window {}; fringe samples {}",
        scenario.grid.t_min,
        scenario.grid.t_max,
        scenario.grid.points_per_decade,
        scenario.window,
        scenario.fringe_samples
    );
    let _ = writeln!(
        report,
        "tolerances: rel {:e}, abs {:e}; P_e below {PE_FLOOR:e} is flagged and excluded from fits",
        scenario.rel_tol, scenario.abs_tol
    );
    for (curve, result) in scenario.curves.iter().zip(&curves) {
        let _ = writeln!(report);
        let d = &curve.decoherence;
        let _ = writeln!(
            report,
            "[{}] mode {}, eta0 {}, eta {}, s_x {}, s_y {}",
            curve.label, curve.mode, d.eta0, d.eta, d.s_x, d.s_y
        );
        let start = rates(curve.schedule.step, &curve.schedule.field(0.0)?, d)?;
        let end = rates(curve.schedule.step, &curve.schedule.field(1.0)?, d)?;
        let _ = writeln!(
            report,
            "turning points: alpha(0) = {:.6e}, beta(0) = {:.6e}, alpha(1) = {:.6e}, beta(1) = {:.6e}",
            start.alpha, start.beta, end.alpha, end.beta
        );
        let entries: Vec<_> = fit_plateaus(&result.series)
            .into_iter()
            .map(|(p, fit)| {
                if let Ok(f) = &fit {
                    overlays.push(FitOverlay {
                        label: format!("{}: {:.2e} T^-{:.2}", curve.label, f.prefactor, f.exponent),
                        fit: *f,
                    });
                }
                (
                    format!(
                        "plateau {:.3} (terminal {:.3}) over T in [{:.4e}, {:.4e}]",
                        p.mean, p.terminal, p.t_start, p.t_end
                    ),
                    fit,
                )
            })
            .collect();
        if entries.is_empty() {
            let _ = writeln!(report, "no plateau detected");
        }
        report.push_str(&format_fit_report(&entries));
        let transitions: Vec<String> = result.regimes.transitions.iter().map(|t| format!("{t:.4e}")).collect();
        let _ = writeln!(report, "transitions: [{}]", transitions.join(", "));
        if let Some(drift) = result.regimes.final_drift {
            let _ = writeln!(report, "final plateau drift: {drift:+.4} per decade");
        }
        let below = result
            .series
            .points
            .iter()
            .filter(|p| p.status == PointStatus::BelowFloor)
            .count();
        if below > 0 {
            let _ = writeln!(report, "{below} point(s) below the floor");
        }
    }
    if !scenario.references.is_empty() {
        let _ = writeln!(report);
        let _ = writeln!(report, "reference lines:");
        for r in &scenario.references {
            let f = &r.fit;
            let _ = writeln!(
                report,
                "{}: c = {:.6e}, a = {}, T in [{}, {}]",
                r.label, f.prefactor, f.exponent, f.t_min, f.t_max
            );
            overlays.push(FitOverlay {
                label: r.label.clone(),
                fit: r.fit,
            });
        }
    }
    for (label, t, reason) in &failed {
        let _ = writeln!(report, "failed: [{label}] T = {t}: {reason}");
    }

    let series: Vec<ScalingSeries> = curves.iter().map(|c| c.series.clone()).collect();
    ensure_parent(&scenario.outputs.csv)?;
    write_series_csv(&scenario.outputs.csv, &series)?;
    ensure_parent(&scenario.outputs.fit)?;
    std::fs::write(&scenario.outputs.fit, &report).map_err(|e| Error::Io {
        path: scenario.outputs.fit.clone(),
        source: e,
    })?;
    ensure_parent(&scenario.outputs.plot)?;
    write_svg(&scenario.outputs.plot, &scenario.title, &series, &overlays)?;
    if let Some(path) = &scenario.outputs.rates {
        ensure_parent(path)?;
        write_rates(path, scenario)?;
    }

    if !failed.is_empty() && !options.keep_going {
        let (label, t, reason) = &failed[0];
        return Err(RunError {
            status: ExitStatus::Integration,
            message: format!(
                "{} point(s) failed; first: [{label}] T = {t}: {reason} (artifacts written; use --keep-going to accept)",
                failed.len()
            ),
        });
    }
    Ok(RunReport {
        curves,
        failed_points: failed.len(),
        fit_report: report,
    })
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }),
        _ => Ok(()),
    }
}

/// `series, s, alpha, beta` on 201 points per curve.
fn write_rates(path: &Path, scenario: &Scenario) -> Result<(), Error> {
    let mut rows = Vec::new();
    for curve in &scenario.curves {
        for i in 0..=200 {
            let s = i as f64 / 200.0;
            let r = rates(curve.schedule.step, &curve.schedule.field(s)?, &curve.decoherence)?;
            rows.push(vec![
                curve.label.clone(),
                format_float(s),
                format_float(r.alpha),
                format_float(r.beta),
            ]);
        }
    }
    write_csv(path, &["series", "s", "alpha", "beta"], rows)
}
