mod cmds;
mod io_util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmds::{SolveFlags, SweepAxis};

/// Batch front-end for the joint waveform / receive-filter design solver.
#[derive(Parser)]
#[command(name = "isac", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Enable the inner-loop extrapolation accelerator.
    #[arg(long)]
    squarem: bool,
    /// Keep the penalty parameter fixed at its initial value.
    #[arg(long)]
    fixed_penalty: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single design instance and write traces and the final design.
    Design {
        #[command(flatten)]
        common: Common,
    },
    /// Run a multi-seed campaign and aggregate per-iteration curves.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// Number of seeds.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Worker threads.
        #[arg(long, default_value_t = num_workers())]
        workers: usize,
    },
    /// Sweep one parameter axis over a list of values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis to sweep: k_max, pslr_db, alpha, or snr_db.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Seeds per axis value.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        /// Worker threads.
        #[arg(long, default_value_t = num_workers())]
        workers: usize,
    },
    /// Simulate scene echoes and form a range-angle image.
    Image {
        #[command(flatten)]
        common: Common,
        /// Scene file: one "bin angle_deg amp_re amp_im" line per scatterer.
        #[arg(long, value_name = "PATH")]
        scene: PathBuf,
        /// Directory holding X.csv and F.csv from a previous design run;
        /// omitted means a fresh design is solved first.
        #[arg(long, value_name = "DIR")]
        design: Option<PathBuf>,
        /// Radar receive SNR in dB.
        #[arg(long, default_value_t = 15.0)]
        snr_db: f64,
    },
}

fn num_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> anyhow::Result<u8> {
        match &cli.command {
            Command::Design { common } => {
                cmds::cmd_design(&common.config, &common.out, flags(common))
            }
            Command::Montecarlo { common, seeds, workers } => {
                cmds::cmd_montecarlo(&common.config, *seeds, *workers, &common.out, flags(common))
            }
            Command::Sweep { common, axis, values, seeds, workers } => cmds::cmd_sweep(
                &common.config,
                *axis,
                values,
                *seeds,
                *workers,
                &common.out,
                flags(common),
            ),
            Command::Image { common, scene, design, snr_db } => cmds::cmd_image(
                &common.config,
                scene,
                design.as_deref(),
                *snr_db,
                &common.out,
                flags(common),
            ),
        }
    };
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn flags(common: &Common) -> SolveFlags {
    SolveFlags { squarem: common.squarem, fixed_penalty: common.fixed_penalty }
}
