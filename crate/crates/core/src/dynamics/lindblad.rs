// SPDX-License-Identifier: Apache-2.0

//! Density-matrix integrator for
//!
//! ```text
//! ε dρ/ds = -i[H, ρ] + α (τ_z ρ τ_z − ρ) + γ (τ_− ρ τ_+ − ½{τ_+ τ_−, ρ}),   H = B·σ
//! ```
//!
//! with `τ_z`, `τ_±` built from the instantaneous eigenvectors of `H`.
//! The state is carried as `Δ = ρ − P_g(s)`, the offset from the
//! instantaneous ground projector, which the generator annihilates; small
//! excitation populations then keep their relative precision.
//! The relaxation rate entering this form is `γ = RELAXATION_CALIBRATION · β`;
//! with that factor the populations and coherences decay exactly as in the
//! Bloch equation.

use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;

use super::ode::{Dop853, Stats};
use super::SimConfig;
use crate::decoherence::rates;
use crate::error::{Error, Result};

/// Converts the Bloch-equation relaxation rate `β` into the jump rate of `τ_−`.
///
/// In the Bloch form the excited population decays at `4β` and the
/// coherences at `2α + 2β`; the Lindblad form gives `γ` and `2α + γ/2`.
pub const RELAXATION_CALIBRATION: f64 = 4.0;

/// Number of evenly spaced checkpoints recorded per run.
pub const CHECKPOINTS: usize = 100;

type C = Complex64;

/// 2×2 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityState {
    pub s: f64,
    pub rho: Matrix2<C>,
}

impl DensityState {
    pub fn trace(&self) -> C {
        self.rho.trace()
    }

    /// Largest entry of `|ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        (self.rho - self.rho.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.rho[(0, 0)].re;
        let d = self.rho[(1, 1)].re;
        let b = 0.5 * (self.rho[(0, 1)] + self.rho[(1, 0)].conj());
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - half_gap, mean + half_gap]
    }

    pub fn bloch_vector(&self) -> Vector3<f64> {
        let r01 = self.rho[(0, 1)];
        Vector3::new(2.0 * r01.re, -2.0 * r01.im, (self.rho[(0, 0)] - self.rho[(1, 1)]).re)
    }

    /// `⟨e|ρ|e⟩` for the instantaneous excited state of `B·σ`.
    pub fn excitation_population(&self, b: &Vector3<f64>) -> Result<f64> {
        let basis = Eigenbasis::new(b)?;
        let e = basis.excited;
        let pe = (e.adjoint() * self.rho * e)[(0, 0)].re;
        Ok(pe.clamp(0.0, 1.0))
    }

    fn to_array(self) -> [f64; 8] {
        let m = &self.rho;
        [
            m[(0, 0)].re,
            m[(0, 0)].im,
            m[(0, 1)].re,
            m[(0, 1)].im,
            m[(1, 0)].re,
            m[(1, 0)].im,
            m[(1, 1)].re,
            m[(1, 1)].im,
        ]
    }

    fn from_array(s: f64, y: &[f64; 8]) -> Self {
        Self {
            s,
            rho: Matrix2::new(
                C::new(y[0], y[1]),
                C::new(y[2], y[3]),
                C::new(y[4], y[5]),
                C::new(y[6], y[7]),
            ),
        }
    }
}

/// Eigenvectors of `B·σ`, each phase-fixed so its first nonzero component
/// is real and positive.
struct Eigenbasis {
    excited: Vector2<C>,
    ground: Vector2<C>,
}

impl Eigenbasis {
    fn new(b: &Vector3<f64>) -> Result<Self> {
        let n = b.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Singularity);
        }
        let plus = C::new(b.x, b.y);
        // Pick the better-conditioned of the two equivalent closed forms.
        let excited = if b.z >= 0.0 {
            Vector2::new(C::from(b.z + n), plus)
        } else {
            Vector2::new(plus.conj(), C::from(n - b.z))
        };
        let ground = Vector2::new(-excited[1].conj(), excited[0].conj());
        Ok(Self {
            excited: fix_gauge(excited),
            ground: fix_gauge(ground),
        })
    }
}

fn fix_gauge(v: Vector2<C>) -> Vector2<C> {
    let lead = if v[0].norm() > 1e-300 { v[0] } else { v[1] };
    let phase = lead.conj() / lead.norm();
    let v = v * phase;
    v.unscale(v.norm())
}

fn pauli(b: &Vector3<f64>) -> Matrix2<C> {
    Matrix2::new(C::from(b.z), C::new(b.x, -b.y), C::new(b.x, b.y), C::from(-b.z))
}

/// `T` times the generator at `s`, applied to `rho`.
fn generator(s: f64, rho: &Matrix2<C>, cfg: &SimConfig) -> Result<Matrix2<C>> {
    let b = cfg.schedule.field(s)?;
    let rate = rates(cfg.schedule.step, &b, &cfg.decoherence)?;
    let basis = Eigenbasis::new(&b)?;

    let h = pauli(&b);
    let i = C::i();
    let mut drho = (h * rho - rho * h) * (-i);

    if rate.alpha != 0.0 {
        let e = basis.excited * basis.excited.adjoint();
        let g = basis.ground * basis.ground.adjoint();
        let tau_z = e - g;
        drho += (tau_z * rho * tau_z - rho) * C::from(rate.alpha);
    }
    if rate.beta != 0.0 {
        let gamma = RELAXATION_CALIBRATION * rate.beta;
        let lower = basis.ground * basis.excited.adjoint();
        let raise = lower.adjoint();
        let number = raise * lower;
        drho += (lower * rho * raise - (number * rho + rho * number) * C::from(0.5)) * C::from(gamma);
    }
    Ok(drho * C::from(cfg.duration))
}

/// `P_g = (1 − B̂·σ)/2`.
fn ground_projector(unit: &Vector3<f64>) -> Matrix2<C> {
    (Matrix2::identity() - pauli(unit)) * C::from(0.5)
}

fn deviation_rhs(s: f64, y: &[f64; 8], dy: &mut [f64; 8], cfg: &SimConfig) -> Result<()> {
    let delta = DensityState::from_array(s, y).rho;
    let (_, dunit) = cfg.schedule.direction(s)?;
    // dΔ/ds = L[Δ] − dP_g/ds, using L[P_g] = 0.
    let d = generator(s, &delta, cfg)? + pauli(&dunit) * C::from(0.5);
    dy.copy_from_slice(&DensityState { s, rho: d }.to_array());
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladRun {
    pub final_state: DensityState,
    pub excitation: f64,
    /// States at `s = i / CHECKPOINTS` for `i = 1..=CHECKPOINTS`.
    pub checkpoints: Vec<DensityState>,
    pub stats: Stats,
}

/// Integrates `ρ` from the instantaneous ground-state projector at `s = 0`.
pub fn integrate_lindblad(cfg: &SimConfig) -> Result<LindbladRun> {
    cfg.validate()?;
    let mut rhs = |s: f64, y: &[f64; 8], dy: &mut [f64; 8]| deviation_rhs(s, y, dy, cfg);
    let mut ode = Dop853::new(cfg.step_control(), &mut rhs, 0.0, [0.0; 8])?;
    let mut checkpoints = Vec::with_capacity(CHECKPOINTS);
    let mut excitation = 0.0;
    for i in 1..=CHECKPOINTS {
        let stop = i as f64 / CHECKPOINTS as f64;
        ode.advance_to(&mut rhs, stop, |_, _| Ok(()))?;
        let b = cfg.schedule.field(stop)?;
        let delta = DensityState::from_array(stop, ode.state()).rho;
        let e = Eigenbasis::new(&b)?.excited;
        excitation = (e.adjoint() * delta * e)[(0, 0)].re.clamp(0.0, 1.0);
        checkpoints.push(DensityState {
            s: stop,
            rho: ground_projector(&b.normalize()) + delta,
        });
    }
    let final_state = *checkpoints.last().expect("at least one checkpoint");
    Ok(LindbladRun {
        final_state,
        excitation,
        checkpoints,
        stats: ode.stats(),
    })
}
