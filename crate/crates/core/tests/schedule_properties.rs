// SPDX-License-Identifier: Apache-2.0

#![allow(clippy::excessive_precision)]

use mzm_braid::decoherence::{alpha, beta, DecoherenceParams};
use mzm_braid::schedule::{complete_beta, theta, CouplingSchedule, SmoothnessOrder, MAX_SMOOTHNESS_ORDER};
use proptest::prelude::*;

fn order(k: u32) -> SmoothnessOrder {
    SmoothnessOrder::new(k).unwrap()
}

/// Monomial expansion of `θ_k`, valid as a polynomial outside `[0, 1]` too.
fn theta_polynomial(k: u32, s: f64) -> f64 {
    let mut sum = 0.0;
    let mut binom = 1.0;
    for i in 0..=k {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * s.powi((k + 1 + i) as i32) / (k + 1 + i) as f64;
        binom = binom * (k - i) as f64 / (i + 1) as f64;
    }
    sum / complete_beta(k)
}

/// `∫₀ˢ yᵏ(1−y)ᵏ dy / B(k+1, k+1)` by composite 5-point Gauss–Legendre,
/// exact for the degree-8 integrands of k ≤ 4 up to rounding.
fn theta_quadrature(k: u32, s: f64) -> f64 {
    const X: [f64; 5] = [
        -0.906_179_845_938_663_992_8,
        -0.538_469_310_105_683_091_0,
        0.0,
        0.538_469_310_105_683_091_0,
        0.906_179_845_938_663_992_8,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_087_5,
        0.478_628_670_499_366_468_0,
        0.568_888_888_888_888_888_9,
        0.478_628_670_499_366_468_0,
        0.236_926_885_056_189_087_5,
    ];
    let panels = 8;
    let h = s / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            let y = mid + 0.5 * h * x;
            total += w * 0.5 * h * (y * (1.0 - y)).powi(k as i32);
        }
    }
    total / complete_beta(k)
}

proptest! {
    #[test]
    fn symmetry(k in 0..=MAX_SMOOTHNESS_ORDER, s in 0.0f64..=1.0) {
        let sum = theta(order(k), s).unwrap() + theta(order(k), 1.0 - s).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_form_agrees(k in 0u32..=4, s in 0.0f64..=1.0) {
        prop_assert!((theta(order(k), s).unwrap() - theta_polynomial(k, s)).abs() < 1e-12);
    }

    #[test]
    fn rates_scale_quadratically(bx in 0.05f64..1.0, by in 0.05f64..1.0, lambda in 0.1f64..10.0) {
        let p = DecoherenceParams::new(0.1, 0.3, 0.1, 0.2).unwrap();
        let b = nalgebra::Vector3::new(bx, by, 0.0);
        let a1 = alpha(&b, &p).unwrap();
        let a2 = alpha(&(b * lambda), &p).unwrap();
        let b1 = beta(&b, &p).unwrap();
        let b2 = beta(&(b * lambda), &p).unwrap();
        prop_assert!((a2 - lambda * lambda * a1).abs() <= 1e-12 * a2.abs().max(1e-300));
        prop_assert!((b2 - lambda * lambda * b1).abs() <= 1e-12 * b2.abs().max(1e-300));
    }
}

#[test]
fn symmetry_on_dense_grid() {
    for k in 0..=MAX_SMOOTHNESS_ORDER {
        for i in 0..=10_000 {
            let s = i as f64 / 10_000.0;
            let sum = theta(order(k), s).unwrap() + theta(order(k), 1.0 - s).unwrap();
            assert!((sum - 1.0).abs() < 1e-12, "k={k} s={s}");
        }
    }
}

#[test]
fn monotone_on_dense_grid() {
    for k in 0..=MAX_SMOOTHNESS_ORDER {
        let values: Vec<f64> = (0..=10_000).map(|i| theta(order(k), i as f64 / 1e4).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]), "k={k}");
    }
}

#[test]
fn matches_quadrature_for_low_orders() {
    for k in 0..=4 {
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            let q = theta_quadrature(k, s);
            assert!((theta(order(k), s).unwrap() - q).abs() < 1e-12, "k={k} s={s}");
        }
    }
}

/// j-th central difference of the polynomial extension at `x`.
fn central_difference(k: u32, j: u32, x: f64, h: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for i in 0..=j {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binom * theta_polynomial(k, x + (j as f64 / 2.0 - i as f64) * h);
        binom = binom * (j - i) as f64 / (i + 1) as f64;
    }
    total / h.powi(j as i32)
}

#[test]
fn endpoint_flatness() {
    let h = 1e-3;
    for k in 1..=3 {
        for j in 1..=k {
            let at_start = central_difference(k, j, 0.0, h);
            let at_end = central_difference(k, j, 1.0, h);
            assert!(at_start.abs() < 10.0 * h, "k={k} j={j}: {at_start}");
            assert!(at_end.abs() < 10.0 * h, "k={k} j={j}: {at_end}");
        }
        // The first non-vanishing derivative is visible at the same step.
        assert!(central_difference(k, k + 1, 0.0, h).abs() > 1.0);
    }
}

#[test]
fn turning_point_rates() {
    let p = DecoherenceParams::new(0.1, 0.1, 0.1, 0.1).unwrap();
    for k in 0..=MAX_SMOOTHNESS_ORDER {
        let schedule = CouplingSchedule::finite(order(k));
        for s in [0.0, 1.0] {
            let b = schedule.field(s).unwrap();
            assert_eq!(beta(&b, &p).unwrap(), 0.0);
            assert!(alpha(&b, &p).unwrap() > 0.0);
        }
    }
}

#[test]
fn rates_symmetric_about_midpoint() {
    let p = DecoherenceParams::new(0.1, 0.1, 0.1, 0.1).unwrap();
    for k in 0..=3 {
        let schedule = CouplingSchedule::finite(order(k));
        for i in 0..=500 {
            let s = i as f64 / 1000.0;
            let b0 = schedule.field(s).unwrap();
            let b1 = schedule.field(1.0 - s).unwrap();
            assert!((alpha(&b0, &p).unwrap() - alpha(&b1, &p).unwrap()).abs() < 1e-15);
            assert!((beta(&b0, &p).unwrap() - beta(&b1, &p).unwrap()).abs() < 1e-15);
        }
    }
}
