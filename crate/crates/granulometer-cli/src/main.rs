//! `granulometer` — batch granulometry pipeline.
//!
//! Subcommands mirror the measurement workflow: `synth` renders seeded
//! synthetic datasets under a lighting table, `analyze` measures size
//! distributions from image sets, `compare` scores reports against a
//! reference curve, `plan` generates the nine-image capture geometry, and
//! `plot` renders report figures as SVG.
//!
//! Exit codes: 0 success, 1 usage/input error, 2 analysis declared the
//! dark case (every image below the low-contrast floor).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use granulometer_cli::{analyze, compare, plan, plot, synth};

#[derive(Parser)]
#[command(name = "granulometer", version, about = "Rock-fragment granulometry pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset: one image set per lighting condition.
    Synth {
        /// Synth config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Master seed; all randomness derives from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure size distributions from an image set.
    Analyze {
        /// Analyze config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output report directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score analysis reports against a reference distribution.
    Compare {
        /// Report JSON paths.
        #[arg(long, required = true, num_args = 1..)]
        report: Vec<PathBuf>,
        /// Reference distribution CSV (size_mm,percent_passing).
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the nine-image flight plan over a pile polygon.
    Plan {
        /// Pile polygon CSV: one `x_m,y_m` vertex per line.
        #[arg(long)]
        polygon: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        altitude: f64,
        #[arg(long, default_value_t = 83.0)]
        tilt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render report/comparison files as SVG figures.
    Plot {
        /// Report or comparison JSON files.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth { config, seed, out } => synth::run(&config, seed, &out),
        Command::Analyze { config, out } => analyze::run(&config, &out),
        Command::Compare {
            report,
            reference,
            out,
        } => compare::run(&report, &reference, &out),
        Command::Plan {
            polygon,
            altitude,
            tilt,
            out,
        } => plan::run(&polygon, altitude, tilt, &out),
        Command::Plot { input, out } => plot::run(&input, &out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
