// SPDX-License-Identifier: Apache-2.0

//! Self-contained SVG log-log line charts of scaling series.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{PointStatus, PowerLawFit, ScalingSeries};
use crate::dynamics::PE_FLOOR;
use crate::error::{Error, Result};
use crate::io::io_error;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 210.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 80.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#ff7f0e", "#9467bd", "#2ca02c", "#8c564b", "#e377c2", "#17becf",
];

/// A fitted power law drawn as a dashed line over its range.
#[derive(Debug, Clone)]
pub struct FitOverlay {
    pub label: String,
    pub fit: PowerLawFit,
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, t: f64) -> f64 {
        LEFT + (t.log10() - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, p: f64) -> f64 {
        HEIGHT - BOTTOM - (p.log10() - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders `series` and `fits` on shared log-log axes.
///
/// Points flagged below the floor or failed are left out and counted in a
/// footnote.
pub fn render_svg(title: &str, series: &[ScalingSeries], fits: &[FitOverlay]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Argument("nothing to plot".into()));
    }
    let drawn: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.usable().map(|p| (p.duration, p.excitation)).collect())
        .collect();
    let omitted = series
        .iter()
        .flat_map(|s| &s.points)
        .filter(|p| p.status != PointStatus::Ok)
        .count();

    let xs = drawn.iter().flatten().map(|p| p.0);
    let ys = drawn.iter().flatten().map(|p| p.1);
    let (mut tmin, mut tmax) = xs.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    let (mut pmin, mut pmax) = ys.fold((f64::INFINITY, 0.0f64), |(a, b), y| (a.min(y), b.max(y)));
    if !tmin.is_finite() {
        // Every point was omitted; fall back to the sweep range.
        tmin = series[0].points.first().map_or(1.0, |p| p.duration);
        tmax = series[0].points.last().map_or(10.0, |p| p.duration);
        pmin = PE_FLOOR;
        pmax = 1.0;
    }
    let axes = Axes {
        x0: tmin.log10().floor(),
        x1: tmax.log10().ceil().max(tmin.log10().floor() + 1.0),
        y0: pmin.log10().floor(),
        y1: pmax.log10().ceil().max(pmin.log10().floor() + 1.0),
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + 0.5 * (WIDTH - LEFT - RIGHT),
        escape(title)
    );
    write_axes(&mut svg, &axes);

    for (i, pts) in drawn.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(t, p)| format!("{:.2},{:.2}", axes.px(t), axes.py(p)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.8" points="{}"/>"#,
            path.join(" ")
        );
    }
    for (i, overlay) in fits.iter().enumerate() {
        let f = &overlay.fit;
        let colour = PALETTE[(series.len() + i) % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
            axes.px(f.t_min),
            axes.py(f.eval(f.t_min)),
            axes.px(f.t_max),
            axes.py(f.eval(f.t_max))
        );
    }

    let legend_x = WIDTH - RIGHT + 15.0;
    let mut y = TOP + 10.0;
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        legend_entry(&mut svg, legend_x, y, colour, false, &s.label);
        y += 20.0;
    }
    for (i, overlay) in fits.iter().enumerate() {
        let colour = PALETTE[(series.len() + i) % PALETTE.len()];
        legend_entry(&mut svg, legend_x, y, colour, true, &overlay.label);
        y += 20.0;
    }
    if omitted > 0 {
        let _ = writeln!(
            svg,
            r##"<text x="{LEFT}" y="{}" font-size="11" fill="#555">* {omitted} point(s) below the P_e floor of {PE_FLOOR:e} or failed are omitted.</text>"##,
            HEIGHT - 12.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn legend_entry(svg: &mut String, x: f64, y: f64, colour: &str, dashed: bool, label: &str) {
    let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
    let _ = writeln!(
        svg,
        r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-width="2"{dash}/>"#,
        x + 24.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}">{}</text>"#,
        x + 30.0,
        y + 4.0,
        escape(label)
    );
}

fn write_axes(svg: &mut String, axes: &Axes) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    let ystep = ((axes.y1 - axes.y0) / 10.0).ceil().max(1.0) as i32;
    for e in (axes.x0 as i32)..=(axes.x1 as i32) {
        let x = axes.px(10f64.powi(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{b}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">10<tspan dy="-6" font-size="9">{e}</tspan></text>"#,
            b + 20.0
        );
    }
    for e in (axes.y0 as i32..=axes.y1 as i32).filter(|e| (e - axes.y0 as i32) % ystep == 0) {
        let y = axes.py(10f64.powi(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{l}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">10<tspan dy="-6" font-size="9">{e}</tspan></text>"#,
            l - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">T (1/B_m)</text>"#,
        0.5 * (l + r),
        b + 45.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="25" y="{0}" text-anchor="middle" transform="rotate(-90 25 {0})">P_e</text>"#,
        0.5 * (t + b)
    );
}

pub fn write_svg(path: &Path, title: &str, series: &[ScalingSeries], fits: &[FitOverlay]) -> Result<()> {
    let svg = render_svg(title, series, fits)?;
    std::fs::write(path, svg).map_err(|e| io_error(path, e))
}
