// SPDX-License-Identifier: Apache-2.0

#![allow(clippy::excessive_precision)]

//! Dormand–Prince 8(5,3) explicit Runge–Kutta integrator with adaptive steps.
//!
//! Error control follows Hairer's DOP853: an embedded 5th-order estimate
//! combined with a 3rd-order one, and the usual safety-factor controller.
//! States are small fixed-size arrays.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

/// Counters and the accumulated local-error estimate of one integration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub evaluations: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Sum over accepted steps of the largest absolute local error component.
    pub error_estimate: f64,
}

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

pub struct Dop853<const N: usize> {
    control: StepControl,
    s: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    facold: f64,
    last_rejected: bool,
    stats: Stats,
}

impl<const N: usize> Dop853<N> {
    pub fn new<F>(control: StepControl, rhs: &mut F, s0: f64, y0: [f64; N]) -> Result<Self>
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
    {
        let mut k1 = [0.0; N];
        rhs(s0, &y0, &mut k1)?;
        Ok(Self {
            control,
            s: s0,
            y: y0,
            k1,
            h: 0.0,
            facold: 1e-4,
            last_rejected: false,
            stats: Stats {
                evaluations: 1,
                ..Stats::default()
            },
        })
    }

    pub fn position(&self) -> f64 {
        self.s
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Advances to exactly `target`, calling `on_step` after every accepted step.
    pub fn advance_to<F, O>(&mut self, rhs: &mut F, target: f64, mut on_step: O) -> Result<()>
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
        O: FnMut(f64, &[f64; N]) -> Result<()>,
    {
        if target < self.s {
            return Err(Error::Argument(format!(
                "cannot integrate backwards from {} to {target}",
                self.s
            )));
        }
        if self.h == 0.0 {
            self.h = self.initial_step(rhs, target)?;
        }
        while self.s < target {
            if self.stats.accepted + self.stats.rejected >= self.control.max_steps {
                return Err(self.failure("step budget exhausted"));
            }
            let remaining = target - self.s;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h <= f64::EPSILON * self.s.abs().max(1.0) * 0.5 && !last {
                return Err(self.failure("step size underflow"));
            }
            let trial = self.attempt(rhs, h)?;
            if trial.err <= 1.0 {
                self.facold = trial.err.max(1e-4);
                self.stats.accepted += 1;
                self.stats.error_estimate += trial.local_error;
                self.s = if last { target } else { self.s + h };
                self.y = trial.y_new;
                rhs(self.s, &self.y, &mut self.k1)?;
                self.stats.evaluations += 1;
                let mut h_new = h / trial.fac;
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.last_rejected = false;
                // Keep the free-running step when the final step was only clipped.
                if !last || h_new < self.h {
                    self.h = h_new;
                }
                on_step(self.s, &self.y)?;
            } else {
                self.stats.rejected += 1;
                self.last_rejected = true;
                self.h = h / (1.0 / FAC_MIN).min(trial.fac11 / SAFE);
            }
            if !self.h.is_finite() || self.h <= 0.0 {
                return Err(self.failure("non-finite step size"));
            }
        }
        Ok(())
    }

    fn failure(&self, reason: &str) -> Error {
        Error::Integration {
            s: self.s,
            steps: self.stats.accepted + self.stats.rejected,
            reason: reason.to_string(),
        }
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.control.abs_tol + self.control.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step<F>(&mut self, rhs: &mut F, target: f64) -> Result<f64>
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
    {
        let span = target - self.s;
        if span == 0.0 {
            return Ok(1e-6);
        }
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(self.y[i], 0.0);
            dnf += (self.k1[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            0.01 * (dny / dnf).sqrt()
        };
        h = h.min(span);
        let y1: [f64; N] = std::array::from_fn(|i| self.y[i] + h * self.k1[i]);
        let mut k2 = [0.0; N];
        rhs(self.s + h, &y1, &mut k2)?;
        self.stats.evaluations += 1;
        let der2: f64 = (0..N)
            .map(|i| ((k2[i] - self.k1[i]) / self.scale(self.y[i], 0.0)).powi(2))
            .sum();
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        Ok((100.0 * h).min(h1).min(span))
    }

    fn attempt<F>(&mut self, rhs: &mut F, h: f64) -> Result<Trial<N>>
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]) -> Result<()>,
    {
        let s = self.s;
        let y = &self.y;
        let k1 = &self.k1;
        let stage = |coeffs: &[(&[f64; N], f64)]| {
            let mut out = *y;
            for (k, a) in coeffs {
                for i in 0..N {
                    out[i] += h * a * k[i];
                }
            }
            out
        };
        let mut k2 = [0.0; N];
        let mut k3 = [0.0; N];
        let mut k4 = [0.0; N];
        let mut k5 = [0.0; N];
        let mut k6 = [0.0; N];
        let mut k7 = [0.0; N];
        let mut k8 = [0.0; N];
        let mut k9 = [0.0; N];
        let mut k10 = [0.0; N];
        let mut k11 = [0.0; N];
        let mut k12 = [0.0; N];

        rhs(s + C2 * h, &stage(&[(k1, A21)]), &mut k2)?;
        rhs(s + C3 * h, &stage(&[(k1, A31), (&k2, A32)]), &mut k3)?;
        rhs(s + C4 * h, &stage(&[(k1, A41), (&k3, A43)]), &mut k4)?;
        rhs(s + C5 * h, &stage(&[(k1, A51), (&k3, A53), (&k4, A54)]), &mut k5)?;
        rhs(s + C6 * h, &stage(&[(k1, A61), (&k4, A64), (&k5, A65)]), &mut k6)?;
        rhs(
            s + C7 * h,
            &stage(&[(k1, A71), (&k4, A74), (&k5, A75), (&k6, A76)]),
            &mut k7,
        )?;
        rhs(
            s + C8 * h,
            &stage(&[(k1, A81), (&k4, A84), (&k5, A85), (&k6, A86), (&k7, A87)]),
            &mut k8,
        )?;
        rhs(
            s + C9 * h,
            &stage(&[(k1, A91), (&k4, A94), (&k5, A95), (&k6, A96), (&k7, A97), (&k8, A98)]),
            &mut k9,
        )?;
        rhs(
            s + C10 * h,
            &stage(&[
                (k1, A101),
                (&k4, A104),
                (&k5, A105),
                (&k6, A106),
                (&k7, A107),
                (&k8, A108),
                (&k9, A109),
            ]),
            &mut k10,
        )?;
        rhs(
            s + C11 * h,
            &stage(&[
                (k1, A111),
                (&k4, A114),
                (&k5, A115),
                (&k6, A116),
                (&k7, A117),
                (&k8, A118),
                (&k9, A119),
                (&k10, A1110),
            ]),
            &mut k11,
        )?;
        rhs(
            s + h,
            &stage(&[
                (k1, A121),
                (&k4, A124),
                (&k5, A125),
                (&k6, A126),
                (&k7, A127),
                (&k8, A128),
                (&k9, A129),
                (&k10, A1210),
                (&k11, A1211),
            ]),
            &mut k12,
        )?;
        self.stats.evaluations += 11;

        let mut y_new = [0.0; N];
        let mut e5 = [0.0; N];
        let (mut err5, mut err3) = (0.0, 0.0);
        for i in 0..N {
            let incr = B1 * k1[i]
                + B6 * k6[i]
                + B7 * k7[i]
                + B8 * k8[i]
                + B9 * k9[i]
                + B10 * k10[i]
                + B11 * k11[i]
                + B12 * k12[i];
            y_new[i] = y[i] + h * incr;
            let sk = self.scale(y[i], y_new[i]);
            let e3 = incr - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            e5[i] = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k11[i]
                + ER12 * k12[i];
            err3 += (e3 / sk).powi(2);
            err5 += (e5[i] / sk).powi(2);
        }
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(self.failure("non-finite state"));
        }
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let shrink = (err5 / deno).sqrt();
        let err = h.abs() * err5 / (deno * N as f64).sqrt();
        let local_error = e5.iter().map(|e| (h * e * shrink).abs()).fold(0.0, f64::max);

        let fac11 = err.powf(1.0 / 8.0);
        let fac = (1.0 / FAC_MAX).max((1.0 / FAC_MIN).min(fac11 / SAFE));
        Ok(Trial {
            y_new,
            err,
            fac11,
            fac,
            local_error,
        })
    }
}

struct Trial<const N: usize> {
    y_new: [f64; N],
    err: f64,
    fac11: f64,
    fac: f64,
    local_error: f64,
}

// Dormand–Prince 8(5,3) tableau.
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;
