// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mzm_braid_cli::{run_scenario, ExitStatus, Mode, Overrides, RunError, RunOptions, Scenario};

/// Sweep the step duration T of one Majorana braiding step and report the
/// power-law scaling of the diabatic excitation population.
#[derive(Debug, Parser)]
#[command(name = "mzm-braid", version)]
struct Args {
    /// Scenario file (TOML); flags below override its values.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Smoothness order of the coupling schedule.
    #[arg(long)]
    k: Option<u32>,
    /// Pure dephasing bath factor.
    #[arg(long)]
    eta0: Option<f64>,
    /// Relaxation bath factor.
    #[arg(long)]
    eta: Option<f64>,
    /// System-bath coupling prefactor along x.
    #[arg(long)]
    sx: Option<f64>,
    /// System-bath coupling prefactor along y.
    #[arg(long)]
    sy: Option<f64>,
    /// Shortest step duration, in units of 1/B_m.
    #[arg(long)]
    tmin: Option<f64>,
    /// Longest step duration, in units of 1/B_m.
    #[arg(long)]
    tmax: Option<f64>,
    /// Grid points per decade of T.
    #[arg(long)]
    ppd: Option<f64>,
    /// Which decoherence channels are active.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Series CSV path.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// SVG plot path.
    #[arg(long)]
    out_plot: Option<PathBuf>,
    /// Fit report path.
    #[arg(long)]
    out_fit: Option<PathBuf>,
    /// Worker threads for the sweep; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Exit successfully even if some points fail to integrate.
    #[arg(long)]
    keep_going: bool,
    /// Integrator relative tolerance.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Integrator absolute tolerance.
    #[arg(long)]
    abs_tol: Option<f64>,
}

fn run(args: Args) -> Result<(), RunError> {
    let overrides = Overrides {
        mode: args.mode,
        k: args.k,
        eta0: args.eta0,
        eta: args.eta,
        s_x: args.sx,
        s_y: args.sy,
        t_min: args.tmin,
        t_max: args.tmax,
        points_per_decade: args.ppd,
        out_csv: args.out_csv,
        out_plot: args.out_plot,
        out_fit: args.out_fit,
        rel_tol: args.rel_tol,
        abs_tol: args.abs_tol,
    };
    let scenario = match &args.scenario {
        Some(path) => Scenario::from_path(path, &overrides)?,
        None => Scenario::from_overrides(&overrides)?,
    };
    if args.jobs == Some(0) {
        return Err(RunError {
            status: ExitStatus::Config,
            message: "--jobs must be at least 1".into(),
        });
    }
    let options = RunOptions {
        jobs: args.jobs,
        keep_going: args.keep_going,
    };
    let report = run_scenario(&scenario, &options)?;
    print!("{}", report.fit_report);
    if report.failed_points > 0 {
        eprintln!("warning: {} point(s) failed to integrate", report.failed_points);
    }
    eprintln!(
        "wrote {}, {}, {}",
        scenario.outputs.csv.display(),
        scenario.outputs.fit.display(),
        scenario.outputs.plot.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::Config as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status as u8)
        }
    }
}
