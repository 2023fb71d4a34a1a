// SPDX-License-Identifier: Apache-2.0

//! Bloch-equation integrator.
//!
//! With `ε = 1/T` and derivatives taken in `s`,
//!
//! ```text
//! ε dR/ds = 2 [ B×R + (α−β) B×(B×R)/|B|² − 2β (B̂ + R) ]
//! ```
//!
//! The integrator evolves `d = R + B̂` instead of `R`. Every term on the
//! right-hand side can be written exactly in `d`, and `d` stays of order
//! `√P_e`, so the relative error control resolves populations far below
//! what `1 + R·B̂` would give after cancellation.

use std::path::Path;

use nalgebra::Vector3;

use super::ode::{Dop853, Stats};
use super::{BlochState, SimConfig};
use crate::decoherence::{rates, Rates};
use crate::error::Result;
use crate::io::write_csv;

/// `dR/ds` for the Bloch equation at `(s, R)`.
pub fn bloch_rhs(s: f64, r: &Vector3<f64>, cfg: &SimConfig) -> Result<Vector3<f64>> {
    let b = cfg.schedule.field(s)?;
    let rate = rates(cfg.schedule.step, &b, &cfg.decoherence)?;
    let unit = b / b.norm();
    Ok(dissipative_precession(&b, &rate, r, &(unit + r)) * cfg.duration)
}

// 2[B×v + (α−β) B×(B×v)/|B|² − 2β w]; for the Bloch vector v = R and w = B̂ + R.
fn dissipative_precession(b: &Vector3<f64>, rate: &Rates, v: &Vector3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    let bxv = b.cross(v);
    let bbxv = b.cross(&bxv);
    (bxv + bbxv * ((rate.alpha - rate.beta) / b.norm_squared()) - w * (2.0 * rate.beta)) * 2.0
}

fn deviation_rhs(s: f64, d: &[f64; 3], dd: &mut [f64; 3], cfg: &SimConfig) -> Result<()> {
    let b = cfg.schedule.field(s)?;
    let rate = rates(cfg.schedule.step, &b, &cfg.decoherence)?;
    let (_, dunit) = cfg.schedule.direction(s)?;
    let d = Vector3::from(*d);
    let v = dissipative_precession(&b, &rate, &d, &d) * cfg.duration + dunit;
    dd.copy_from_slice(v.as_slice());
    Ok(())
}

/// One sample of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub s: f64,
    pub r: Vector3<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub excitation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlochRun {
    pub final_state: BlochState,
    /// Excitation population at `s = 1`.
    pub excitation: f64,
    pub stats: Stats,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Integrates from the instantaneous ground state at `s = 0` to `s = 1`.
pub fn integrate_bloch(cfg: &SimConfig) -> Result<BlochRun> {
    run(cfg, false)
}

/// Like [`integrate_bloch`], also recording every accepted step.
pub fn integrate_bloch_traced(cfg: &SimConfig) -> Result<BlochRun> {
    run(cfg, true)
}

fn run(cfg: &SimConfig, trace: bool) -> Result<BlochRun> {
    cfg.validate()?;
    let mut rhs = |s: f64, d: &[f64; 3], dd: &mut [f64; 3]| deviation_rhs(s, d, dd, cfg);
    let mut ode = Dop853::new(cfg.step_control(), &mut rhs, 0.0, [0.0; 3])?;
    let mut trajectory = Vec::new();
    if trace {
        trajectory.push(sample(cfg, 0.0, &[0.0; 3])?);
        ode.advance_to(&mut rhs, 1.0, |s, d| {
            trajectory.push(sample(cfg, s, d)?);
            Ok(())
        })?;
    } else {
        ode.advance_to(&mut rhs, 1.0, |_, _| Ok(()))?;
    }
    let final_state = to_state(cfg, 1.0, ode.state())?;
    let excitation = final_state.excitation_population(&cfg.schedule)?;
    Ok(BlochRun {
        final_state,
        excitation,
        stats: ode.stats(),
        trajectory: trace.then_some(trajectory),
    })
}

fn to_state(cfg: &SimConfig, s: f64, d: &[f64; 3]) -> Result<BlochState> {
    let (unit, _) = cfg.schedule.direction(s)?;
    let deviation = Vector3::from(*d);
    Ok(BlochState {
        s,
        r: deviation - unit,
        deviation,
    })
}

fn sample(cfg: &SimConfig, s: f64, d: &[f64; 3]) -> Result<TrajectoryPoint> {
    let state = to_state(cfg, s, d)?;
    let b = cfg.schedule.field(s)?;
    let rate = rates(cfg.schedule.step, &b, &cfg.decoherence)?;
    Ok(TrajectoryPoint {
        s,
        r: state.r,
        alpha: rate.alpha,
        beta: rate.beta,
        excitation: state.excitation_population(&cfg.schedule)?,
    })
}

/// Writes `s, r_x, r_y, r_z, alpha, beta, P_e_instantaneous`.
pub fn write_trajectory_csv(path: &Path, points: &[TrajectoryPoint]) -> Result<()> {
    let header = ["s", "r_x", "r_y", "r_z", "alpha", "beta", "P_e_instantaneous"];
    let rows = points.iter().map(|p| {
        [p.s, p.r.x, p.r.y, p.r.z, p.alpha, p.beta, p.excitation]
            .iter()
            .map(|v| crate::io::format_float(*v))
            .collect::<Vec<_>>()
    });
    write_csv(path, &header, rows)
}
