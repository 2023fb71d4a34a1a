// SPDX-License-Identifier: Apache-2.0

//! Diabatic excitation of a Majorana braiding step coupled to a
//! parity-conserving bath.
//!
//! The ancillary two-level system follows `H = B(s)·σ` while pure dephasing
//! and relaxation act in its instantaneous eigenbasis. The crate integrates
//! the resulting Bloch equation, cross-checks it against a density-matrix
//! integrator and an adiabatic-series expansion, and extracts power-law
//! scaling regimes of the excitation population as the step duration `T`
//! is swept.

pub mod adiabatic;
pub mod analysis;
pub mod decoherence;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod plot;
pub mod schedule;

pub use error::{Error, Result};
