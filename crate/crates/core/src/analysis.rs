// SPDX-License-Identifier: Apache-2.0

//! Duration sweeps and power-law scaling analysis of `P_e(T)`.
//!
//! Closed-system populations carry interference fringes between the
//! excitation amplitudes created at the two ends of the step; their relative
//! phase advances as `2TΦ` with `Φ = ∫|B| ds`. A sweep can average each point
//! over one fringe period (`fringe_samples > 1`), which removes the fringes
//! and leaves the incoherent sum whose power law the fits look for.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::dynamics::{integrate_bloch, SimConfig, PE_FLOOR};
use crate::error::{Error, Result};
use crate::io::{format_float, read_csv, write_csv};
use crate::schedule::CouplingSchedule;

/// Default points per local fit.
pub const DEFAULT_WINDOW: usize = 7;
/// Half-width of the exponent band that defines a plateau.
pub const PLATEAU_TOLERANCE: f64 = 0.25;
/// Minimum number of consecutive window positions forming a plateau.
pub const MIN_PLATEAU_LEN: usize = 3;
/// A run whose fitted trend changes the exponent by more than
/// `PLATEAU_TOLERANCE` across its span, and by more than this per decade,
/// is a ramp rather than a plateau.
pub const MAX_PLATEAU_DRIFT: f64 = 2.0 * PLATEAU_TOLERANCE;
/// Fits with a lower coefficient of determination are rejected.
pub const MIN_R2: f64 = 0.95;
pub const MIN_FIT_POINTS: usize = 6;
/// Span in decades of `T` at the end of a plateau averaged into its
/// terminal exponent.
pub const TERMINAL_SPAN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Ok,
    /// Below [`PE_FLOOR`]; kept in the output but excluded from fits.
    BelowFloor,
    Failed(String),
}

impl PointStatus {
    pub fn label(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::BelowFloor => "below_floor",
            PointStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub duration: f64,
    pub excitation: f64,
    pub status: PointStatus,
}

impl SeriesPoint {
    pub fn new(duration: f64, excitation: f64) -> Self {
        let status = if excitation < PE_FLOOR || !excitation.is_finite() {
            PointStatus::BelowFloor
        } else {
            PointStatus::Ok
        };
        Self {
            duration,
            excitation,
            status,
        }
    }

    pub fn is_usable(&self) -> bool {
        self.status == PointStatus::Ok
    }
}

/// Local log-log slope centred on `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExponent {
    pub duration: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    pub label: String,
    pub points: Vec<SeriesPoint>,
    pub window: usize,
    pub local_exponents: Vec<LocalExponent>,
}

impl ScalingSeries {
    /// Builds a series from `(T, P_e)` pairs; `T` must be strictly increasing.
    pub fn from_pairs(label: impl Into<String>, pairs: &[(f64, f64)]) -> Result<Self> {
        let points = pairs.iter().map(|&(t, p)| SeriesPoint::new(t, p)).collect();
        Self::from_points(label, points)
    }

    pub fn from_points(label: impl Into<String>, points: Vec<SeriesPoint>) -> Result<Self> {
        if points.windows(2).any(|w| w[1].duration <= w[0].duration) {
            return Err(Error::Argument("durations must be strictly increasing".into()));
        }
        Ok(Self {
            label: label.into(),
            points,
            window: 0,
            local_exponents: Vec::new(),
        })
    }

    pub fn usable(&self) -> impl Iterator<Item = &SeriesPoint> {
        self.points.iter().filter(|p| p.is_usable())
    }

    /// Computes and stores the local exponents for `window`.
    pub fn with_local_exponents(mut self, window: usize) -> Result<Self> {
        self.local_exponents = local_exponent(&self, window)?;
        self.window = window;
        Ok(self)
    }
}

/// `P_e ≈ c · T^(−a)` on `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub r2: f64,
    pub points: usize,
}

impl PowerLawFit {
    /// Log-log slope, `−a`.
    pub fn slope(&self) -> f64 {
        -self.exponent
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.prefactor * t.powf(-self.exponent)
    }
}

/// Log-spaced durations with `points_per_decade`, both ends included.
pub fn log_grid(t_min: f64, t_max: f64, points_per_decade: f64) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && points_per_decade > 0.0) {
        return Err(Error::Argument(format!(
            "invalid grid: T in [{t_min}, {t_max}] at {points_per_decade} points per decade"
        )));
    }
    let decades = (t_max / t_min).log10();
    let n = (decades * points_per_decade).round().max(1.0) as usize + 1;
    Ok((0..n)
        .map(|i| {
            if i + 1 == n {
                t_max
            } else {
                t_min * 10f64.powf(decades * i as f64 / (n - 1) as f64)
            }
        })
        .collect())
}

/// `Φ = ∫₀¹ |B(s)| ds` by composite Gauss–Legendre quadrature.
pub fn mean_field_norm(schedule: &CouplingSchedule) -> Result<f64> {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let panels = 64;
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            total += w * 0.5 * h * schedule.field(mid + 0.5 * h * x)?.norm();
        }
    }
    Ok(total)
}

/// Period in `T` of the endpoint interference fringes, `π / Φ`.
pub fn fringe_period(schedule: &CouplingSchedule) -> Result<f64> {
    Ok(PI / mean_field_norm(schedule)?)
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    /// Samples per fringe period averaged into each point; 1 disables averaging.
    pub fringe_samples: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            jobs: None,
            fringe_samples: 4,
        }
    }
}

/// Integrates `template` at every duration of `grid`.
///
/// Failed points are kept with [`PointStatus::Failed`]; the sweep only fails
/// when every point does.
pub fn sweep(
    label: impl Into<String>,
    template: &SimConfig,
    grid: &[f64],
    options: &SweepOptions,
) -> Result<ScalingSeries> {
    if grid.is_empty() {
        return Err(Error::Argument("empty duration grid".into()));
    }
    if options.fringe_samples == 0 {
        return Err(Error::Argument("fringe_samples must be at least 1".into()));
    }
    template.with_duration(grid[0]).validate()?;
    let period = fringe_period(&template.schedule)?;
    let n = options.fringe_samples;
    let offsets: Vec<f64> = (0..n)
        .map(|j| (j as f64 - 0.5 * (n as f64 - 1.0)) * period / n as f64)
        .collect();

    let evaluate = |&t: &f64| -> SeriesPoint {
        let mut total = 0.0;
        for off in &offsets {
            // Keep the averaging window inside T > 0 for very short steps.
            let duration = (t + off).max(t / 4.0);
            match integrate_bloch(&template.with_duration(duration)) {
                Ok(run) => total += run.excitation,
                Err(e) => {
                    return SeriesPoint {
                        duration: t,
                        excitation: f64::NAN,
                        status: PointStatus::Failed(e.to_string()),
                    }
                }
            }
        }
        SeriesPoint::new(t, total / n as f64)
    };

    let points: Vec<SeriesPoint> = match options.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?
            .install(|| grid.par_iter().map(evaluate).collect()),
        None => grid.par_iter().map(evaluate).collect(),
    };
    if points.iter().all(|p| matches!(p.status, PointStatus::Failed(_))) {
        return Err(Error::SweepFailed);
    }
    ScalingSeries::from_points(label, points)
}

struct LineFit {
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    LineFit { slope, intercept, r2 }
}

/// Sliding-window least-squares slope of `ln P_e` against `ln T` over the
/// usable points of `series`.
pub fn local_exponent(series: &ScalingSeries, window: usize) -> Result<Vec<LocalExponent>> {
    if window < 5 || window.is_multiple_of(2) {
        return Err(Error::Argument(format!("window must be odd and >= 5, got {window}")));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = series.usable().map(|p| (p.duration.ln(), p.excitation.ln())).unzip();
    if window > xs.len() {
        return Err(Error::Argument(format!(
            "window {window} exceeds the {} usable points",
            xs.len()
        )));
    }
    let half = window / 2;
    Ok((0..=xs.len() - window)
        .map(|i| LocalExponent {
            duration: xs[i + half].exp(),
            slope: least_squares(&xs[i..i + window], &ys[i..i + window]).slope,
        })
        .collect())
}

/// Least-squares power law through the usable points with `T` in `[t_min, t_max]`.
pub fn fit_powerlaw(series: &ScalingSeries, t_min: f64, t_max: f64) -> Result<PowerLawFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .usable()
        .filter(|p| p.duration >= t_min && p.duration <= t_max)
        .map(|p| (p.duration.ln(), p.excitation.ln()))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::EmptyRange {
            needed: MIN_FIT_POINTS,
            found: xs.len(),
        });
    }
    let line = least_squares(&xs, &ys);
    if line.r2 < MIN_R2 {
        return Err(Error::LowFitQuality {
            r2: line.r2,
            min_r2: MIN_R2,
            t_min,
            t_max,
        });
    }
    Ok(PowerLawFit {
        prefactor: line.intercept.exp(),
        exponent: -line.slope,
        t_min,
        t_max,
        r2: line.r2,
        points: xs.len(),
    })
}

/// A run of local exponents confined to a band of width `2 · PLATEAU_TOLERANCE`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub t_start: f64,
    pub t_end: f64,
    pub mean: f64,
    /// Mean over the last [`TERMINAL_SPAN`] decades; differs from `mean`
    /// when the plateau drifts.
    pub terminal: f64,
    pub first: usize,
    pub last: usize,
}

impl Plateau {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegimeReport {
    pub plateaus: Vec<Plateau>,
    /// Durations where the exponent crosses the midpoint between consecutive
    /// plateaus that differ by more than `2 · PLATEAU_TOLERANCE`.
    pub transitions: Vec<f64>,
    /// Change of the local exponent per decade of `T` across the last plateau.
    pub final_drift: Option<f64>,
}

impl RegimeReport {
    pub fn last_plateau(&self) -> Option<&Plateau> {
        self.plateaus.last()
    }
}

/// Groups local exponents into plateaus and locates the transitions between them.
pub fn scaling_regimes(exponents: &[LocalExponent]) -> RegimeReport {
    let band = 2.0 * PLATEAU_TOLERANCE;
    let mut raw: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    while start < exponents.len() {
        let (mut lo, mut hi) = (exponents[start].slope, exponents[start].slope);
        let mut end = start;
        while end + 1 < exponents.len() {
            let next = exponents[end + 1].slope;
            if next.max(hi) - next.min(lo) > band {
                break;
            }
            lo = lo.min(next);
            hi = hi.max(next);
            end += 1;
        }
        match flat_core(exponents, start, end) {
            Some(run) => {
                raw.push(run);
                start = run.1 + 1;
            }
            None => start += 1,
        }
    }

    let mean = |(a, b): (usize, usize)| exponents[a..=b].iter().map(|e| e.slope).sum::<f64>() / (b + 1 - a) as f64;
    // Neighbouring runs closer than the band are one slowly drifting regime.
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in raw {
        match merged.last_mut() {
            Some(prev) if (mean(*prev) - mean(run)).abs() <= band => prev.1 = run.1,
            _ => merged.push(run),
        }
    }
    let plateaus: Vec<Plateau> = merged
        .iter()
        .map(|&(a, b)| {
            let cutoff = exponents[b].duration / 10f64.powf(TERMINAL_SPAN);
            let tail = (a..=b).find(|&i| exponents[i].duration >= cutoff).unwrap_or(b);
            Plateau {
                t_start: exponents[a].duration,
                t_end: exponents[b].duration,
                mean: mean((a, b)),
                terminal: mean((tail, b)),
                first: a,
                last: b,
            }
        })
        .collect();

    let transitions = plateaus
        .windows(2)
        .filter_map(|pair| midpoint_crossing(exponents, &pair[0], &pair[1]))
        .collect();

    let final_drift = plateaus.last().map(|p| drift(&exponents[p.first..=p.last]));

    RegimeReport {
        plateaus,
        transitions,
        final_drift,
    }
}

fn drift(exponents: &[LocalExponent]) -> f64 {
    let xs: Vec<f64> = exponents.iter().map(|e| e.duration.log10()).collect();
    let ys: Vec<f64> = exponents.iter().map(|e| e.slope).collect();
    least_squares(&xs, &ys).slope
}

fn is_flat(run: &[LocalExponent]) -> bool {
    let rate = drift(run).abs();
    let span = (run[run.len() - 1].duration / run[0].duration).log10();
    rate * span <= PLATEAU_TOLERANCE || rate <= MAX_PLATEAU_DRIFT
}

/// Trims `[first, last]` from its outlying end until the run is flat enough
/// to count as a plateau.
fn flat_core(exponents: &[LocalExponent], mut first: usize, mut last: usize) -> Option<(usize, usize)> {
    while last + 1 - first >= MIN_PLATEAU_LEN {
        let run = &exponents[first..=last];
        if is_flat(run) {
            return Some((first, last));
        }
        let mut sorted: Vec<f64> = run.iter().map(|e| e.slope).collect();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        if (exponents[first].slope - median).abs() > (exponents[last].slope - median).abs() {
            first += 1;
        } else {
            last -= 1;
        }
    }
    None
}

fn midpoint_crossing(exponents: &[LocalExponent], a: &Plateau, b: &Plateau) -> Option<f64> {
    let mid = 0.5 * (a.mean + b.mean);
    let side = |v: f64| (v - mid).signum();
    let start_side = side(a.mean);
    for i in a.last..b.first {
        let (e0, e1) = (exponents[i], exponents[i + 1]);
        if side(e0.slope) == start_side && side(e1.slope) != start_side {
            let frac = (mid - e0.slope) / (e1.slope - e0.slope);
            let log_t = e0.duration.ln() + frac * (e1.duration.ln() - e0.duration.ln());
            return Some(log_t.exp());
        }
    }
    // Adjacent plateaus with no intermediate point: place the crossing between them.
    Some((exponents[a.last].duration * exponents[b.first].duration).sqrt())
}

/// Transition durations between detected plateaus; empty when fewer than two
/// distinct plateaus exist.
pub fn detect_transition(exponents: &[LocalExponent]) -> Vec<f64> {
    scaling_regimes(exponents).transitions
}

/// Fits each detected plateau of `series` over its duration span.
pub fn fit_plateaus(series: &ScalingSeries) -> Vec<(Plateau, Result<PowerLawFit>)> {
    let report = scaling_regimes(&series.local_exponents);
    let half = series.window / 2;
    let usable: Vec<f64> = series.usable().map(|p| p.duration).collect();
    report
        .plateaus
        .into_iter()
        .map(|p| {
            // Cover every point that contributed to the plateau's windows.
            let t_min = usable[p.first];
            let t_max = usable[(p.last + 2 * half).min(usable.len() - 1)];
            (p, fit_powerlaw(series, t_min, t_max))
        })
        .collect()
}

/// Writes `series, T, P_e, local_exponent, flags`; rows grouped by series.
pub fn write_series_csv(path: &Path, series: &[ScalingSeries]) -> Result<()> {
    let header = ["series", "T", "P_e", "local_exponent", "flags"];
    let mut rows = Vec::new();
    for s in series {
        for p in &s.points {
            let local = s
                .local_exponents
                .iter()
                .find(|e| e.duration == p.duration)
                .map(|e| format_float(e.slope))
                .unwrap_or_default();
            rows.push(vec![
                s.label.clone(),
                format_float(p.duration),
                format_float(p.excitation),
                local,
                p.status.label().to_string(),
            ]);
        }
    }
    write_csv(path, &header, rows)
}

/// Reads a file written by [`write_series_csv`]. Local exponents are
/// recomputed when the stored window is known, so callers pass `window`.
pub fn read_series_csv(path: &Path, window: Option<usize>) -> Result<Vec<ScalingSeries>> {
    let (header, rows) = read_csv(path)?;
    let bad = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (c_series, c_t, c_p, c_flags) = (column("series")?, column("T")?, column("P_e")?, column("flags")?);
    let mut out: Vec<(String, Vec<SeriesPoint>)> = Vec::new();
    for (line, row) in rows.iter().enumerate() {
        let num = |c: usize| row[c].parse::<f64>().map_err(|e| bad(format!("row {}: {e}", line + 2)));
        let status = match row[c_flags].as_str() {
            "ok" => PointStatus::Ok,
            "below_floor" => PointStatus::BelowFloor,
            "failed" => PointStatus::Failed("recorded as failed".into()),
            other => return Err(bad(format!("row {}: unknown flag {other}", line + 2))),
        };
        let point = SeriesPoint {
            duration: num(c_t)?,
            excitation: num(c_p)?,
            status,
        };
        match out.last_mut() {
            Some((label, pts)) if *label == row[c_series] => pts.push(point),
            _ => out.push((row[c_series].clone(), vec![point])),
        }
    }
    out.into_iter()
        .map(|(label, pts)| {
            let s = ScalingSeries::from_points(label, pts)?;
            match window {
                Some(w) if s.usable().count() >= w => s.with_local_exponents(w),
                _ => Ok(s),
            }
        })
        .collect()
}

/// Plain-text block listing `(range, c, a, r²)` per fitted segment.
pub fn format_fit_report(entries: &[(String, Result<PowerLawFit>)]) -> String {
    let mut out = String::new();
    for (label, fit) in entries {
        match fit {
            Ok(f) => {
                let _ = writeln!(
                    out,
                    "{label}: T in [{:.6e}, {:.6e}]  c = {:.6e}  a = {:.6}  r2 = {:.6}  n = {}",
                    f.t_min, f.t_max, f.prefactor, f.exponent, f.r2, f.points
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{label}: no fit ({e})");
            }
        }
    }
    out
}
