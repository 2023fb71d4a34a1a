// SPDX-License-Identifier: Apache-2.0

//! Open-system evolution over one braiding step.
//!
//! [`bloch`] integrates the Bloch equation and is the reference path for all
//! reported populations. [`lindblad`] integrates the density matrix directly
//! and serves as an independent cross-check.

pub mod bloch;
pub mod lindblad;
pub mod ode;

use nalgebra::Vector3;

use crate::decoherence::DecoherenceParams;
use crate::error::{Error, Result};
use crate::schedule::CouplingSchedule;

pub use bloch::{bloch_rhs, integrate_bloch, integrate_bloch_traced, BlochRun, TrajectoryPoint};
pub use lindblad::{integrate_lindblad, DensityState, LindbladRun, RELAXATION_CALIBRATION};

pub const DEFAULT_REL_TOL: f64 = 1e-12;
pub const DEFAULT_ABS_TOL: f64 = 1e-14;
pub const DEFAULT_MAX_STEPS: usize = 5_000_000;

/// Smallest excitation population the default tolerances resolve.
pub const PE_FLOOR: f64 = 1e-13;

/// One simulation of a single braiding step of duration `T` (units of `1/B_m`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub duration: f64,
    pub schedule: CouplingSchedule,
    pub decoherence: DecoherenceParams,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl SimConfig {
    pub fn new(duration: f64, schedule: CouplingSchedule, decoherence: DecoherenceParams) -> Self {
        Self {
            duration,
            schedule,
            decoherence,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    /// Adiabaticity parameter `ε = 1/T`.
    pub fn epsilon(&self) -> f64 {
        1.0 / self.duration
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Argument(format!("duration must be > 0, got {}", self.duration)));
        }
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(Error::Argument(format!("{name} must lie in (0, 1e-3], got {tol}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Argument("max_steps must be positive".into()));
        }
        if !(self.schedule.amplitude.is_finite() && self.schedule.amplitude > 0.0) {
            return Err(Error::Argument("schedule amplitude must be > 0".into()));
        }
        self.decoherence.validate()
    }

    pub(crate) fn step_control(&self) -> ode::StepControl {
        ode::StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_steps: self.max_steps,
        }
    }
}

/// Bloch vector at dimensionless time `s`.
///
/// `deviation` is `R - R₀ = R + B̂`, carried separately because it stays
/// small and keeps tiny excitation populations resolvable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub s: f64,
    pub r: Vector3<f64>,
    pub deviation: Vector3<f64>,
}

impl BlochState {
    /// Instantaneous ground state `R = -B̂`.
    pub fn ground(schedule: &CouplingSchedule, s: f64) -> Result<Self> {
        let (unit, _) = schedule.direction(s)?;
        Ok(Self {
            s,
            r: -unit,
            deviation: Vector3::zeros(),
        })
    }

    /// Excitation population relative to the instantaneous Hamiltonian of `schedule`.
    pub fn excitation_population(&self, schedule: &CouplingSchedule) -> Result<f64> {
        let (unit, _) = schedule.direction(self.s)?;
        Ok((0.5 * self.deviation.dot(&unit)).clamp(0.0, 1.0))
    }
}

/// `P_e = (1 + R·B̂)/2`, the overlap with the instantaneous excited state.
pub fn excitation_population(r: &Vector3<f64>, b: &Vector3<f64>) -> Result<f64> {
    let norm = b.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Singularity);
    }
    Ok((0.5 * (1.0 + r.dot(b) / norm)).clamp(0.0, 1.0))
}
