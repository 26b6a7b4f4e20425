//! `tomocal`: simulate marker projections, calibrate scan geometry, audit
//! data consistency and reproduce the Monte-Carlo error tables.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver degeneracy, 4 every
//! realization failed at some noise level, 5 consistency check failed.
//! Errors are reported on stderr as one line of JSON.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tomocal_core::parallel::{Branch, ViewPair};
use tomocal_core::FanBeamPattern;

use crate::commands::{CalibrateArgs, DccArgs, ExperimentArgs, ReferenceChoice, SimulateArgs};

#[derive(Parser)]
#[command(name = "tomocal", version, about = "Marker-based geometric calibration for 2D tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    Ii,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewPairArg {
    First,
    BestConditioned,
}

#[derive(Subcommand)]
enum Command {
    /// Project a rig for given or randomly sampled views and write a CSV.
    Simulate {
        /// Rig JSON (`"geometry": "parallel"` or `"fanbeam"`).
        #[arg(long)]
        rig: PathBuf,
        /// JSON array of views: `{alpha, shift}` or `{lambda, jitter}`.
        #[arg(long, conflicts_with = "random")]
        views: Option<PathBuf>,
        /// Sample this many views with the experiment's default ranges.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, env = "TOMOCAL_SEED")]
        seed: Option<u64>,
        /// Gaussian detection noise as a fraction of the pixel size.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.01)]
        pixel_size: f64,
        /// Projection CSV (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ground-truth JSON with the rig and every view.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Recover the scan geometry from a projection CSV.
    Calibrate {
        #[arg(long)]
        projections: PathBuf,
        /// Parallel: quadrant of the reference angle.
        #[arg(long, value_enum, default_value = "I")]
        branch: BranchArg,
        #[arg(long, value_enum, default_value = "first")]
        view_pair: ViewPairArg,
        /// Fan-beam rig JSON supplying D and the spacing pattern.
        #[arg(long)]
        rig: Option<PathBuf>,
        #[arg(long = "D")]
        d: Option<f64>,
        #[arg(long = "L", requires_all = ["k1", "k2", "k3"])]
        l: Option<f64>,
        #[arg(long)]
        k1: Option<f64>,
        #[arg(long)]
        k2: Option<f64>,
        #[arg(long)]
        k3: Option<f64>,
        /// Fan-beam: `best-excited`, `average` or a view index.
        #[arg(long, default_value = "best-excited")]
        reference_view: ReferenceChoice,
        /// Fan-beam: ignore group labels and split each view by cross-ratio.
        #[arg(long)]
        classify: bool,
        #[arg(long, default_value_t = 1e-3)]
        cross_ratio_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte-Carlo noise experiment and write summary tables.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, env = "TOMOCAL_SEED")]
        seed: Option<u64>,
        /// Override the number of noise realizations per level.
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Check projection moments against their polynomial laws.
    DccCheck {
        #[arg(long)]
        projections: PathBuf,
        /// Ground-truth JSON written by `simulate --truth`.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        /// Use positions as recorded instead of removing the known shifts.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a rig JSON and list its violations.
    ValidateRig { rig: PathBuf },
}

fn run(cli: Cli) -> error::CliResult<u8> {
    match cli.command {
        Command::Simulate {
            rig,
            views,
            random,
            seed,
            noise,
            pixel_size,
            out,
            truth,
            manifest,
        } => commands::simulate(SimulateArgs {
            rig,
            views,
            random,
            seed,
            noise,
            pixel_size,
            out,
            truth,
            manifest,
        }),
        Command::Calibrate {
            projections,
            branch,
            view_pair,
            rig,
            d,
            l,
            k1,
            k2,
            k3,
            reference_view,
            classify,
            cross_ratio_tol,
            out,
        } => commands::calibrate(CalibrateArgs {
            projections,
            branch: match branch {
                BranchArg::I => Branch::I,
                BranchArg::Ii => Branch::II,
            },
            view_pair: match view_pair {
                ViewPairArg::First => ViewPair::First,
                ViewPairArg::BestConditioned => ViewPair::BestConditioned,
            },
            rig,
            d,
            pattern: match (l, k1, k2, k3) {
                (Some(l), Some(k1), Some(k2), Some(k3)) => Some(FanBeamPattern { l, k1, k2, k3 }),
                _ => None,
            },
            reference_view,
            classify,
            cross_ratio_tol,
            out,
        }),
        Command::Experiment {
            config,
            out_dir,
            seed,
            realizations,
        } => commands::experiment(ExperimentArgs {
            config,
            out_dir,
            seed,
            realizations,
        }),
        Command::DccCheck {
            projections,
            truth,
            k_max,
            raw,
            out,
        } => commands::dcc_check(DccArgs {
            projections,
            truth,
            k_max,
            raw,
            out,
        }),
        Command::ValidateRig { rig } => commands::validate_rig_file(&rig),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
