//! `rotstar`: rotating-star equilibria from the command line.
//!
//! Exit status: 0 success, 1 configuration or input error, 2 hypothesis
//! violation (or failed `verify` checks), 3 convergence failure.

mod commands;
mod config;
mod error;
mod output;
mod rules;
mod verify;

use clap::{Args, Parser, Subcommand};
use config::{Params, RunFile};
use error::CliError;
use std::path::PathBuf;

#[derive(Args, Debug)]
struct Common {
    /// Sectioned key=value run file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

/// Declares a subcommand whose flags are all strings, so that values from
/// flags and from the run file go through the same validation.
macro_rules! command_args {
    ($name:ident { $($field:ident = $key:literal : $help:literal,)* }) => {
        #[derive(Args, Debug)]
        struct $name {
            $(
                #[arg(long = $key, help = $help)]
                $field: Option<String>,
            )*
        }

        impl $name {
            fn flags(&self) -> Vec<(&'static str, Option<String>)> {
                vec![$(($key, self.$field.clone())),*]
            }
        }
    };
}

command_args!(MonotoneArgs {
    out = "out": "Output directory [default: out]",
    seed = "seed": "Seed recorded with the outputs [default: 0]",
    gamma = "gamma": "Adiabatic index, > 2 [default: 3]",
    entropy = "entropy": "Effective entropy law [default: constant:0]",
    omega2 = "omega2": "Rotation law [default: rigid-squared:0.05]",
    nr = "nr": "Radial nodes of the fitted grid [default: 129]",
    tol = "tol": "Step tolerance of the iteration [default: 1e-8]",
    max_iters = "max-iters": "Sweep limit [default: 2000]",
    shift = "shift": "Shift of the iteration map [default: 0]",
    radius = "radius": "Target ball radius or auto [default: auto]",
    slack = "slack": "Relative margin on the coefficient bounds [default: 0.05]",
});

command_args!(VariationalArgs {
    out = "out": "Output directory [default: out]",
    seed = "seed": "Seed recorded with the outputs [default: 0]",
    gamma = "gamma": "Adiabatic index in (4/3, 2) [default: 1.5]",
    entropy = "entropy": "Effective entropy law [default: constant:0]",
    omega2 = "omega2": "Rotation law [default: rigid-squared:1]",
    nr = "nr": "Radial nodes of the fitted grid [default: 129]",
    radius = "radius": "Ball radius [default: 4]",
    p = "p": "Constraint value int f w, or auto [default: auto]",
    max_iters = "max-iters": "Descent iteration limit [default: 20000]",
    grad_tol = "grad-tol": "Stationarity tolerance [default: 1e-6]",
    step0 = "step0": "Initial step length [default: 1]",
});

command_args!(ContinuationArgs {
    out = "out": "Output directory [default: out]",
    seed = "seed": "Seed recorded with the outputs [default: 0]",
    gamma = "gamma": "Adiabatic index in (4/3, 2) [default: 1.5]",
    entropy = "entropy": "Effective entropy law [default: constant:0]",
    omega2 = "omega2": "Rotation law [default: rigid-squared:1]",
    nr = "nr": "Radial nodes of the first stage [default: 33]",
    radius = "radius": "Radius of the first stage [default: 4]",
    p = "p": "Constraint value, or auto [default: auto]",
    max_iters = "max-iters": "Descent iteration limit [default: 20000]",
    grad_tol = "grad-tol": "Stationarity tolerance [default: 1e-6]",
    step0 = "step0": "Initial step length [default: 1]",
    stages = "stages": "Number of radius doublings plus one [default: 3]",
});

command_args!(InverseArgs {
    out = "out": "Output directory [default: out]",
    seed = "seed": "Seed recorded with the outputs [default: 0]",
    density = "density": "ellipsoid:a=..,b=..[,power=..] | file:<axifield> | solution:<axifield>",
    mode = "mode": "Boundary checks: smooth or holder [default: smooth]",
    nr = "nr": "Radial nodes for analytic densities [default: 129]",
    extent = "extent": "Grid half-width for analytic densities [default: 1.5]",
    gamma = "gamma": "Adiabatic index of a solution: input",
    entropy = "entropy": "Effective entropy of a solution: input [default: constant:0]",
});

command_args!(GravityArgs {
    out = "out": "Output directory [default: out]",
    seed = "seed": "Seed recorded with the outputs [default: 0]",
    nr = "nr": "Radial nodes; nz = 2 nr - 1 [default: 129]",
    extent = "extent": "Grid half-width [default: 2]",
    radius = "radius": "Ball radius [default: 1]",
});

command_args!(LaneEmdenArgs {
    out = "out": "Output directory [default: out]",
    seed = "seed": "Seed recorded with the outputs [default: 0]",
    n = "n": "Polytropic index",
    step = "step": "Integration step [default: 1e-4]",
});

command_args!(VerifyArgs {
    dir = "dir": "Artifact directory written by another command",
    seed = "seed": "Seed of the randomised sweeps [default: 0]",
    samples = "samples": "Samples in the inequality sweep [default: 10000]",
});

#[derive(Subcommand, Debug)]
enum Command {
    /// Sub/supersolution iteration for gamma > 2.
    SolveMonotone(MonotoneArgs),
    /// Constrained energy minimisation for 4/3 < gamma < 2.
    SolveVariational(VariationalArgs),
    /// Variational solves on radii R, 2R, 4R, ...
    Continuation(ContinuationArgs),
    /// Pressure and Omega^2 from a prescribed density.
    Inverse(InverseArgs),
    /// Uniform-ball benchmark of the potential.
    GravityTest(GravityArgs),
    /// Lane–Emden profile.
    LaneEmden(LaneEmdenArgs),
    /// Re-check a directory of stored artifacts.
    Verify(VerifyArgs),
}

#[derive(Parser, Debug)]
#[command(name = "rotstar", version, about = "Axisymmetric rotating-star equilibria")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("ROTSTAR_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("ROTSTAR_THREADS must be a positive integer, got '{v}'")))?;
        rotstar::par::configure_threads(n);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let file = cli.common.config.as_deref().map(RunFile::load).transpose()?;
    let params = |name: &str, keys: &[&str], flags| Params::new(name, keys, file, flags);
    match cli.command {
        Command::SolveMonotone(a) => {
            commands::solve_monotone(&params("solve-monotone", commands::MONOTONE_KEYS, a.flags())?)
        }
        Command::SolveVariational(a) => {
            commands::solve_variational(&params("solve-variational", commands::VARIATIONAL_KEYS, a.flags())?)
        }
        Command::Continuation(a) => {
            commands::continuation(&params("continuation", commands::CONTINUATION_KEYS, a.flags())?)
        }
        Command::Inverse(a) => commands::inverse(&params("inverse", commands::INVERSE_KEYS, a.flags())?),
        Command::GravityTest(a) => commands::gravity_test(&params("gravity-test", commands::GRAVITY_KEYS, a.flags())?),
        Command::LaneEmden(a) => commands::lane_emden(&params("lane-emden", commands::LANE_EMDEN_KEYS, a.flags())?),
        Command::Verify(a) => verify::verify(&params("verify", verify::VERIFY_KEYS, a.flags())?),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("rotstar: {e}");
        std::process::exit(e.exit_code());
    }
}
