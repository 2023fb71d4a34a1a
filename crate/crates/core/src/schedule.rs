// SPDX-License-Identifier: Apache-2.0

//! Coupling schedules for one braiding step.
//!
//! Within a step the couplings interpolate between two of the three
//! Majorana couplings while the third stays at zero. The interpolation is
//! the regularized incomplete beta function `θ_k(s) = I_s(k + 1, k + 1)`,
//! whose first `k` derivatives vanish at both ends of the step.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Largest supported smoothness order.
pub const MAX_SMOOTHNESS_ORDER: u32 = 8;

/// Number of time derivatives of the schedule that vanish at the step endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SmoothnessOrder(u32);

impl SmoothnessOrder {
    pub fn new(k: u32) -> Result<Self> {
        if k > MAX_SMOOTHNESS_ORDER {
            return Err(Error::SmoothnessOrder(k));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for SmoothnessOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the three steps of the full braid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Step {
    #[default]
    Step1,
    Step2,
    Step3,
}

impl Step {
    /// Component indices `(falling, rising)` of the two active couplings.
    /// The remaining index is identically zero during the step.
    pub fn active_axes(self) -> (usize, usize) {
        match self {
            Step::Step1 => (0, 1),
            Step::Step2 => (1, 2),
            Step::Step3 => (2, 0),
        }
    }

    pub fn idle_axis(self) -> usize {
        match self {
            Step::Step1 => 2,
            Step::Step2 => 0,
            Step::Step3 => 1,
        }
    }
}

/// Shape of the ramp between the two active couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    /// `(1 - θ_k, θ_k)`; the norm dips to `1/√2` at mid-step.
    FiniteSmooth(SmoothnessOrder),
    /// `(cos(πs/2), sin(πs/2))`; constant norm.
    InfinitelySmooth,
}

/// The coupling vector `B(s)` over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSchedule {
    pub step: Step,
    pub profile: Profile,
    pub amplitude: f64,
}

impl CouplingSchedule {
    /// Step 1 with unit amplitude.
    pub fn finite(k: SmoothnessOrder) -> Self {
        Self {
            step: Step::Step1,
            profile: Profile::FiniteSmooth(k),
            amplitude: 1.0,
        }
    }

    pub fn infinitely_smooth() -> Self {
        Self {
            step: Step::Step1,
            profile: Profile::InfinitelySmooth,
            amplitude: 1.0,
        }
    }

    pub fn with_step(mut self, step: Step) -> Self {
        self.step = step;
        self
    }

    pub fn field(&self, s: f64) -> Result<Vector3<f64>> {
        check_domain(s)?;
        let (falling, rising) = match self.profile {
            Profile::FiniteSmooth(k) => binomial_tails(k, s),
            Profile::InfinitelySmooth => {
                let (sin, cos) = (FRAC_PI_2 * s).sin_cos();
                (cos, sin)
            }
        };
        Ok(self.place(falling, rising))
    }

    pub fn field_derivative(&self, s: f64) -> Result<Vector3<f64>> {
        check_domain(s)?;
        let (falling, rising) = match self.profile {
            Profile::FiniteSmooth(k) => {
                let d = theta_derivative_unchecked(k, s);
                (-d, d)
            }
            Profile::InfinitelySmooth => {
                let (sin, cos) = (FRAC_PI_2 * s).sin_cos();
                (-FRAC_PI_2 * sin, FRAC_PI_2 * cos)
            }
        };
        Ok(self.place(falling, rising))
    }

    /// Unit vector along `B(s)` and its `s`-derivative.
    pub fn direction(&self, s: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let b = self.field(s)?;
        let db = self.field_derivative(s)?;
        let norm = b.norm();
        if norm == 0.0 {
            return Err(Error::Singularity);
        }
        let unit = b / norm;
        let dunit = (db - unit * unit.dot(&db)) / norm;
        Ok((unit, dunit))
    }

    fn place(&self, falling: f64, rising: f64) -> Vector3<f64> {
        let (i, j) = self.step.active_axes();
        let mut b = Vector3::zeros();
        b[i] = self.amplitude * falling;
        b[j] = self.amplitude * rising;
        b
    }
}

fn check_domain(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain(s))
    }
}

/// `θ_k(s)`, the regularized incomplete beta function `I_s(k+1, k+1)`.
pub fn theta(k: SmoothnessOrder, s: f64) -> Result<f64> {
    check_domain(s)?;
    Ok(theta_unchecked(k, s))
}

/// `dθ_k/ds = s^k (1-s)^k / B(k+1, k+1)`.
pub fn theta_derivative(k: SmoothnessOrder, s: f64) -> Result<f64> {
    check_domain(s)?;
    Ok(theta_derivative_unchecked(k, s))
}

// For integer arguments the incomplete beta integral is a binomial tail,
// I_s(k+1, k+1) = sum_{j=k+1}^{2k+1} C(2k+1, j) s^j (1-s)^(2k+1-j).
// Every term is non-negative, so the sum has no cancellation. Only the
// smaller tail is summed; the larger one is its complement, which keeps
// θ_k monotone and exactly symmetric in floating point.
fn binomial_tails(k: SmoothnessOrder, s: f64) -> (f64, f64) {
    let n = 2 * k.get() + 1;
    let x = s.min(1.0 - s);
    let t = 1.0 - x;
    let term = |j: u32| binomial(n, j) * x.powi(j as i32) * t.powi((n - j) as i32);
    let small: f64 = (k.get() + 1..=n).map(term).sum::<f64>().min(0.5);
    let large = 1.0 - small;
    if s <= 0.5 {
        (large, small)
    } else {
        (small, large)
    }
}

fn theta_unchecked(k: SmoothnessOrder, s: f64) -> f64 {
    binomial_tails(k, s).1
}

fn theta_derivative_unchecked(k: SmoothnessOrder, s: f64) -> f64 {
    let k = k.get();
    (s * (1.0 - s)).powi(k as i32) / complete_beta(k)
}

/// `B(k+1, k+1) = (k!)^2 / (2k+1)!`.
pub fn complete_beta(k: u32) -> f64 {
    1.0 / ((2 * k + 1) as f64 * binomial(2 * k, k))
}

fn binomial(n: u32, r: u32) -> f64 {
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k(k: u32) -> SmoothnessOrder {
        SmoothnessOrder::new(k).unwrap()
    }

    #[test]
    fn theta_examples() {
        assert_abs_diff_eq!(theta(k(0), 0.3).unwrap(), 0.3, epsilon = 1e-15);
        for order in 0..=MAX_SMOOTHNESS_ORDER {
            assert_abs_diff_eq!(theta(k(order), 0.5).unwrap(), 0.5, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(theta(k(1), 0.25).unwrap(), 0.15625, epsilon = 1e-15);
        assert_abs_diff_eq!(theta(k(2), 0.25).unwrap(), 0.103515625, epsilon = 1e-15);
    }

    #[test]
    fn closed_forms_for_low_orders() {
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let t1 = 3.0 * s * s - 2.0 * s * s * s;
            let t2 = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
            assert_abs_diff_eq!(theta(k(1), s).unwrap(), t1, epsilon = 1e-14);
            assert_abs_diff_eq!(theta(k(2), s).unwrap(), t2, epsilon = 1e-14);
            assert_abs_diff_eq!(theta_derivative(k(1), s).unwrap(), 6.0 * s * (1.0 - s), epsilon = 1e-14);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(theta(k(1), -0.1), Err(Error::Domain(_))));
        assert!(matches!(theta(k(1), 1.0001), Err(Error::Domain(_))));
        let sched = CouplingSchedule::finite(k(1));
        assert!(sched.field(1.5).is_err());
        assert!(sched.field_derivative(f64::NAN).is_err());
        assert!(SmoothnessOrder::new(9).is_err());
    }

    #[test]
    fn step1_field_examples() {
        let sched = CouplingSchedule::finite(k(1));
        assert_eq!(sched.field(0.0).unwrap(), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(sched.field(1.0).unwrap(), Vector3::new(0.0, 1.0, 0.0));
        let mid = sched.field(0.5).unwrap();
        assert_abs_diff_eq!(mid, Vector3::new(0.5, 0.5, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(mid.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn step1_derivative_examples() {
        let d = |order, s| CouplingSchedule::finite(k(order)).field_derivative(s).unwrap();
        assert_eq!(d(1, 0.0), Vector3::zeros());
        assert_abs_diff_eq!(d(0, 0.5), Vector3::new(-1.0, 1.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(d(1, 0.5), Vector3::new(-1.5, 1.5, 0.0), epsilon = 1e-14);
    }

    #[test]
    fn later_steps_are_cyclic_permutations() {
        let base = CouplingSchedule::finite(k(2));
        for s in [0.0, 0.2, 0.7, 1.0] {
            let b1 = base.field(s).unwrap();
            let b2 = base.with_step(Step::Step2).field(s).unwrap();
            let b3 = base.with_step(Step::Step3).field(s).unwrap();
            assert_eq!(b2, Vector3::new(0.0, b1.x, b1.y));
            assert_eq!(b3, Vector3::new(b1.y, 0.0, b1.x));
        }
    }

    #[test]
    fn schedule_invariants_on_grid() {
        let schedules = (0..=MAX_SMOOTHNESS_ORDER)
            .map(|o| CouplingSchedule::finite(k(o)))
            .chain([CouplingSchedule::infinitely_smooth()]);
        for sched in schedules {
            for step in [Step::Step1, Step::Step2, Step::Step3] {
                let sched = sched.with_step(step);
                for i in 0..=1000 {
                    let s = i as f64 / 1000.0;
                    let b = sched.field(s).unwrap();
                    assert!(b.iter().all(|&c| (0.0..=1.0).contains(&c)), "{b:?}");
                    assert_eq!(b[step.idle_axis()], 0.0);
                    assert!(b.norm() >= std::f64::consts::FRAC_1_SQRT_2 - 1e-12);
                    if sched.profile == Profile::InfinitelySmooth {
                        assert_abs_diff_eq!(b.norm(), 1.0, epsilon = 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-6;
        for sched in [CouplingSchedule::finite(k(3)), CouplingSchedule::infinitely_smooth()] {
            for i in 1..20 {
                let s = i as f64 / 20.0;
                let fd = (sched.field(s + h).unwrap() - sched.field(s - h).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(sched.field_derivative(s).unwrap(), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn direction_derivative_matches_central_difference() {
        let sched = CouplingSchedule::finite(k(1));
        let h = 1e-6;
        let (_, du) = sched.direction(0.3).unwrap();
        let (up, _) = sched.direction(0.3 + h).unwrap();
        let (dn, _) = sched.direction(0.3 - h).unwrap();
        assert_abs_diff_eq!(du, (up - dn) / (2.0 * h), epsilon = 1e-8);
    }
}
