// SPDX-License-Identifier: Apache-2.0

//! Pure-dephasing and relaxation rates of the ancillary two-level system.
//!
//! The bath couples to `σ_i` with strength proportional to `B_i`, so both
//! rates depend on the instantaneous coupling vector. The formulas are
//! written for the couplings of step 1, `(B_x, B_y)`; the other steps map
//! their two active couplings onto those slots.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::schedule::Step;

/// Bath factors and system–bath coupling prefactors, constant over a braid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceParams {
    /// Dephasing bath factor.
    pub eta0: f64,
    /// Relaxation bath factor.
    pub eta: f64,
    pub s_x: f64,
    pub s_y: f64,
}

impl Default for DecoherenceParams {
    fn default() -> Self {
        Self::closed()
    }
}

impl DecoherenceParams {
    pub fn new(eta0: f64, eta: f64, s_x: f64, s_y: f64) -> Result<Self> {
        let p = Self { eta0, eta, s_x, s_y };
        p.validate()?;
        Ok(p)
    }

    /// No bath; prefactors kept at their usual 0.1.
    pub fn closed() -> Self {
        Self {
            eta0: 0.0,
            eta: 0.0,
            s_x: 0.1,
            s_y: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta0", self.eta0),
            ("eta", self.eta),
            ("s_x", self.s_x),
            ("s_y", self.s_y),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Argument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.eta0 == 0.0 && self.eta == 0.0
    }
}

/// Instantaneous rates at one point of the step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub alpha: f64,
    pub beta: f64,
}

/// Pure-dephasing rate `η₀ (s_x² B_x⁴ + s_y² B_y⁴) / |B|²`.
pub fn alpha(b: &Vector3<f64>, p: &DecoherenceParams) -> Result<f64> {
    let n2 = norm_squared(b)?;
    let (bx2, by2) = (b.x * b.x, b.y * b.y);
    Ok(p.eta0 * (p.s_x * p.s_x * bx2 * bx2 + p.s_y * p.s_y * by2 * by2) / n2)
}

/// Relaxation rate `(η/4)(s_x² + s_y²) B_x² B_y² / |B|²`.
pub fn beta(b: &Vector3<f64>, p: &DecoherenceParams) -> Result<f64> {
    let n2 = norm_squared(b)?;
    Ok(0.25 * p.eta * (p.s_x * p.s_x + p.s_y * p.s_y) * b.x * b.x * b.y * b.y / n2)
}

/// Both rates for a coupling vector belonging to `step`.
pub fn rates(step: Step, b: &Vector3<f64>, p: &DecoherenceParams) -> Result<Rates> {
    let (i, j) = step.active_axes();
    let relabeled = Vector3::new(b[i], b[j], b[step.idle_axis()]);
    Ok(Rates {
        alpha: alpha(&relabeled, p)?,
        beta: beta(&relabeled, p)?,
    })
}

fn norm_squared(b: &Vector3<f64>) -> Result<f64> {
    let n2 = b.norm_squared();
    if n2 > 0.0 && n2.is_finite() {
        Ok(n2)
    } else {
        Err(Error::Singularity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(eta0: f64, eta: f64) -> DecoherenceParams {
        DecoherenceParams::new(eta0, eta, 0.1, 0.1).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let p = params(0.1, 0.0);
        assert_relative_eq!(
            alpha(&Vector3::new(1.0, 0.0, 0.0), &p).unwrap(),
            0.001,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            alpha(&Vector3::new(0.5, 0.5, 0.0), &p).unwrap(),
            2.5e-4,
            max_relative = 1e-14
        );
        assert_eq!(alpha(&Vector3::new(0.3, 0.7, 0.0), &params(0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(&Vector3::new(1.0, 0.0, 0.0), &params(0.3, 2.0)).unwrap(), 0.0);
        assert_relative_eq!(
            beta(&Vector3::new(0.5, 0.5, 0.0), &params(0.0, 0.1)).unwrap(),
            6.25e-5,
            max_relative = 1e-14
        );
        assert_eq!(beta(&Vector3::new(0.3, 0.7, 0.0), &params(1.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn zero_field_is_singular() {
        let p = params(0.1, 0.1);
        assert!(matches!(alpha(&Vector3::zeros(), &p), Err(Error::Singularity)));
        assert!(matches!(beta(&Vector3::zeros(), &p), Err(Error::Singularity)));
    }

    #[test]
    fn negative_parameters_rejected() {
        assert!(DecoherenceParams::new(-0.1, 0.0, 0.1, 0.1).is_err());
        assert!(DecoherenceParams::new(0.1, f64::NAN, 0.1, 0.1).is_err());
        assert!(DecoherenceParams::new(0.1, 0.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn later_steps_use_relabelled_couplings() {
        let p = DecoherenceParams::new(0.1, 0.2, 0.1, 0.3).unwrap();
        let b1 = Vector3::new(0.8, 0.3, 0.0);
        let r1 = rates(Step::Step1, &b1, &p).unwrap();
        let r2 = rates(Step::Step2, &Vector3::new(0.0, 0.8, 0.3), &p).unwrap();
        let r3 = rates(Step::Step3, &Vector3::new(0.3, 0.0, 0.8), &p).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1, r3);
    }
}
