// SPDX-License-Identifier: Apache-2.0

//! Scenario handling for the `mzm-braid` command-line tool.

pub mod run;
pub mod scenario;

pub use run::{run_scenario, ExitStatus, RunError, RunOptions, RunReport};
pub use scenario::{ConfigError, Mode, Overrides, Scenario};
