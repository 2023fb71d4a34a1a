// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimensionless time s = {0} lies outside [0, 1]")]
    Domain(f64),

    #[error("smoothness order {0} exceeds the supported maximum of {max}", max = crate::schedule::MAX_SMOOTHNESS_ORDER)]
    SmoothnessOrder(u32),

    #[error("coupling vector has zero norm; rates and eigenbasis are undefined")]
    Singularity,

    #[error("matrix restricted to the plane orthogonal to B has rank below 2")]
    RankDeficient,

    #[error("integration failed at s = {s} after {steps} steps: {reason}")]
    Integration { s: f64, steps: usize, reason: String },

    #[error("adiabatic correction is under-resolved: estimated differencing error {estimate:e} exceeds {threshold:e}")]
    Accuracy { estimate: f64, threshold: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("power-law fit rejected: r^2 = {r2:.4} below {min_r2} on T in [{t_min}, {t_max}]")]
    LowFitQuality {
        r2: f64,
        min_r2: f64,
        t_min: f64,
        t_max: f64,
    },

    #[error("power-law fit needs at least {needed} usable points in range, found {found}")]
    EmptyRange { needed: usize, found: usize },

    #[error("every point of the sweep failed")]
    SweepFailed,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },
}
