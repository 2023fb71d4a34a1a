// SPDX-License-Identifier: Apache-2.0

//! Adiabatic series for the dephasing-only Bloch equation `ε Ṙ = M R`.
//!
//! With `R = Σ εʲ R_j` the orders satisfy `M R_j = Ṙ_{j−1}`. Since `M` is
//! singular with kernel `span(B)`, each order is fixed only up to a multiple
//! of `R₀ = −B̂`:
//!
//! ```text
//! R_j = f_{j−1}(s) R₀ + M⁺ Ṙ_{j−1},   f_{j−1}(s) = ∫₀ˢ Ṙ₀ᵀ M⁺ Ṙ_{j−1} ds'
//! ```
//!
//! where the running integral makes `Ṙ_j` solvable at the next order and
//! `f_{j−1}(0) = 0` keeps the initial state on the ground state. Derivatives
//! are taken by finite differences on a uniform grid in `s`.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::decoherence::{rates, DecoherenceParams};
use crate::error::{Error, Result};
use crate::io::{format_float, write_csv};
use crate::schedule::CouplingSchedule;

pub const DEFAULT_GRID_POINTS: usize = 4097;
/// Highest order the series is evaluated to.
pub const MAX_ORDER: usize = 3;
/// Largest tolerated relative gap between the sixth- and fourth-order
/// derivative estimates.
pub const DIFFERENCING_THRESHOLD: f64 = 1e-6;

/// Cross-product matrix of `b`: `matrix_a(b) * v == b × v`.
pub fn matrix_a(b: &Vector3<f64>) -> Matrix3<f64> {
    b.cross_matrix()
}

/// `M = 2(A + α A² / |B|²)`.
pub fn matrix_m(b: &Vector3<f64>, alpha: f64) -> Result<Matrix3<f64>> {
    let n2 = b.norm_squared();
    if n2 == 0.0 || !n2.is_finite() {
        return Err(Error::Singularity);
    }
    let a = matrix_a(b);
    Ok(2.0 * (a + a * a * (alpha / n2)))
}

/// Pseudo-inverse of `M` whose kernel is `span(b)`.
///
/// `M` maps the plane orthogonal to `b` onto itself, so adding the projector
/// onto `b` makes it invertible and subtracting it afterwards removes the
/// kernel again.
pub fn pinv_m(m: &Matrix3<f64>, b: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let n = b.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Singularity);
    }
    let u = b / n;
    let projector = u * u.transpose();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let shifted = m / scale + projector;
    if shifted.determinant().abs() < 1e-12 {
        return Err(Error::RankDeficient);
    }
    let inverse = shifted.try_inverse().ok_or(Error::RankDeficient)?;
    Ok((inverse - projector) / scale)
}

/// Order `j` of the series sampled on the grid.
#[derive(Debug, Clone)]
pub struct AdiabaticCorrection {
    pub order: usize,
    /// `R_j(s)` at every grid point.
    pub r: Vec<Vector3<f64>>,
    /// `M⁺ Ṙ_{j−1}(s)`, the part orthogonal to `R₀`; zero for `j = 0`.
    pub perpendicular: Vec<Vector3<f64>>,
    /// Running coefficient `f_{j−1}(s)`; zero for `j = 0`.
    pub f: Vec<f64>,
    /// Relative differencing error estimate for `Ṙ_{j−1}`.
    pub differencing_error: f64,
}

impl AdiabaticCorrection {
    /// `f_{j−1}(1)`.
    pub fn f_end(&self) -> f64 {
        *self.f.last().expect("grid is nonempty")
    }

    pub fn perpendicular_end(&self) -> Vector3<f64> {
        *self.perpendicular.last().expect("grid is nonempty")
    }
}

/// Corrections through some order, sharing one grid and one set of `M⁺(s)`.
#[derive(Debug, Clone)]
pub struct AdiabaticSeries {
    pub grid: Vec<f64>,
    pinv: Vec<Matrix3<f64>>,
    corrections: Vec<AdiabaticCorrection>,
}

impl AdiabaticSeries {
    /// Zeroth order `R₀ = −B̂` on `points` uniform samples of `[0, 1]`.
    ///
    /// Only pure dephasing enters the expansion; a nonzero relaxation factor
    /// is rejected.
    pub fn new(schedule: &CouplingSchedule, decoherence: &DecoherenceParams, points: usize) -> Result<Self> {
        decoherence.validate()?;
        if decoherence.eta != 0.0 {
            return Err(Error::Argument(
                "the adiabatic series covers pure dephasing only (eta must be 0)".into(),
            ));
        }
        if points < 33 {
            return Err(Error::Argument(format!("grid needs at least 33 points, got {points}")));
        }
        let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
        let mut r0 = Vec::with_capacity(points);
        let mut pinv = Vec::with_capacity(points);
        for &s in &grid {
            let b = schedule.field(s)?;
            let alpha = rates(schedule.step, &b, decoherence)?.alpha;
            pinv.push(pinv_m(&matrix_m(&b, alpha)?, &b)?);
            r0.push(-b.normalize());
        }
        let zero = AdiabaticCorrection {
            order: 0,
            r: r0,
            perpendicular: vec![Vector3::zeros(); points],
            f: vec![0.0; points],
            differencing_error: 0.0,
        };
        Ok(Self {
            grid,
            pinv,
            corrections: vec![zero],
        })
    }

    pub fn order(&self) -> usize {
        self.corrections.len() - 1
    }

    pub fn correction(&self, j: usize) -> Option<&AdiabaticCorrection> {
        self.corrections.get(j)
    }

    pub fn corrections(&self) -> &[AdiabaticCorrection] {
        &self.corrections
    }

    /// Computes the next order from the current highest one.
    pub fn extend(&mut self) -> Result<&AdiabaticCorrection> {
        let j = self.corrections.len();
        if j > MAX_ORDER {
            return Err(Error::Argument(format!("orders above {MAX_ORDER} are not supported")));
        }
        let h = self.grid[1] - self.grid[0];
        let (d_prev, differencing_error) = differentiate(&self.corrections[j - 1].r, h);
        if differencing_error > DIFFERENCING_THRESHOLD {
            return Err(Error::Accuracy {
                estimate: differencing_error,
                threshold: DIFFERENCING_THRESHOLD,
            });
        }
        let (d_r0, _) = differentiate(&self.corrections[0].r, h);
        let perpendicular: Vec<Vector3<f64>> = self.pinv.iter().zip(&d_prev).map(|(p, d)| p * d).collect();
        let integrand: Vec<f64> = d_r0.iter().zip(&perpendicular).map(|(a, b)| a.dot(b)).collect();
        let f = running_integral(&integrand, h);
        let r = self.corrections[0]
            .r
            .iter()
            .zip(&perpendicular)
            .zip(&f)
            .map(|((r0, p), fv)| r0 * *fv + p)
            .collect();
        self.corrections.push(AdiabaticCorrection {
            order: j,
            r,
            perpendicular,
            f,
            differencing_error,
        });
        Ok(&self.corrections[j])
    }

    /// `R_⊥(s_i) = Σ_j εʲ M⁺ Ṙ_{j−1}(s_i)` at grid index `i` over the computed orders.
    pub fn perpendicular_at(&self, i: usize, duration: f64) -> Vector3<f64> {
        let eps = 1.0 / duration;
        self.corrections
            .iter()
            .skip(1)
            .map(|c| c.perpendicular[i] * eps.powi(c.order as i32))
            .sum()
    }

    pub fn perpendicular_end(&self, duration: f64) -> Vector3<f64> {
        self.perpendicular_at(self.grid.len() - 1, duration)
    }

    /// `Σ_j εʲ f_{j−1}(1)`, the shift of `R(1)` along `R₀(1)`.
    pub fn longitudinal_end(&self, duration: f64) -> f64 {
        let eps = 1.0 / duration;
        self.corrections
            .iter()
            .skip(1)
            .map(|c| c.f_end() * eps.powi(c.order as i32))
            .sum()
    }

    /// Writes `s, order, r_x, r_y, r_z, f` for every computed order.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut rows = Vec::new();
        for c in &self.corrections {
            for (i, s) in self.grid.iter().enumerate() {
                rows.push(vec![
                    format_float(*s),
                    c.order.to_string(),
                    format_float(c.r[i].x),
                    format_float(c.r[i].y),
                    format_float(c.r[i].z),
                    format_float(c.f[i]),
                ]);
            }
        }
        write_csv(path, &["s", "order", "r_x", "r_y", "r_z", "f"], rows)
    }
}

/// Order `j` of the series for `schedule`, computing the lower orders on the way.
pub fn correction(
    j: usize,
    schedule: &CouplingSchedule,
    decoherence: &DecoherenceParams,
    points: usize,
) -> Result<AdiabaticCorrection> {
    let mut series = AdiabaticSeries::new(schedule, decoherence, points)?;
    while series.order() < j {
        series.extend()?;
    }
    Ok(series.corrections.swap_remove(j))
}

/// The two structural terms of the predicted excitation population at `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeDecomposition {
    /// `ε f₀(1) + ε² f₁(1) + …`; negative when dephasing shortens `R`.
    pub longitudinal: f64,
    /// `|R_⊥(1)|²`.
    pub transverse: f64,
    /// `|R_⊥(0)|²`, the dressing the evolution starts without.
    pub transverse_start: f64,
}

impl PeDecomposition {
    /// Population averaged over the endpoint interference fringes.
    ///
    /// Each endpoint contributes an excitation amplitude of size `|R_⊥|/2`;
    /// without their cross term the populations add.
    pub fn excitation(&self) -> f64 {
        -0.5 * self.longitudinal + 0.25 * (self.transverse + self.transverse_start)
    }
}

pub fn predict_pe_decomposition(series: &AdiabaticSeries, duration: f64) -> PeDecomposition {
    PeDecomposition {
        longitudinal: series.longitudinal_end(duration),
        transverse: series.perpendicular_end(duration).norm_squared(),
        transverse_start: series.perpendicular_at(0, duration).norm_squared(),
    }
}

/// Finite-difference weights for the first derivative at `x0` (Fornberg).
fn fd_weights(offsets: &[f64], x0: f64) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i] - x0;
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Derivative with `width`-point stencils, centred where possible and
/// one-sided near the ends.
fn stencil_derivative(values: &[Vector3<f64>], h: f64, width: usize) -> Vec<Vector3<f64>> {
    let n = values.len();
    let half = width / 2;
    let mut cache: Vec<(usize, Vec<f64>)> = Vec::new();
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - width);
            let at = i - start;
            let weights = match cache.iter().find(|(a, _)| *a == at) {
                Some((_, w)) => w.clone(),
                None => {
                    let offsets: Vec<f64> = (0..width).map(|o| o as f64).collect();
                    let w = fd_weights(&offsets, at as f64);
                    cache.push((at, w.clone()));
                    w
                }
            };
            weights
                .iter()
                .enumerate()
                .map(|(o, w)| values[start + o] * *w)
                .sum::<Vector3<f64>>()
                / h
        })
        .collect()
}

/// Sixth-order derivative and its relative gap to the fourth-order estimate.
fn differentiate(values: &[Vector3<f64>], h: f64) -> (Vec<Vector3<f64>>, f64) {
    let d6 = stencil_derivative(values, h, 7);
    let d4 = stencil_derivative(values, h, 5);
    let scale = d6.iter().map(|v| v.amax()).fold(0.0, f64::max);
    let gap = d6.iter().zip(&d4).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    let estimate = if scale > 0.0 { gap / scale } else { 0.0 };
    (d6, estimate)
}

/// Running integral `∫₀^{s_i}` with cubic-interpolation panels.
fn running_integral(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let panel = if n < 4 {
            0.5 * (values[i] + values[i + 1])
        } else if i == 0 {
            (9.0 * values[0] + 19.0 * values[1] - 5.0 * values[2] + values[3]) / 24.0
        } else if i == n - 2 {
            (9.0 * values[n - 1] + 19.0 * values[n - 2] - 5.0 * values[n - 3] + values[n - 4]) / 24.0
        } else {
            (-values[i - 1] + 13.0 * values[i] + 13.0 * values[i + 1] - values[i + 2]) / 24.0
        };
        out[i + 1] = out[i] + h * panel;
    }
    out
}
