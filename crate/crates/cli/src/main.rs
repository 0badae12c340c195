//! `ballmaps`: geometric rank, normal forms, frames and second fundamental
//! forms of proper rational maps between balls.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use ballmaps_core::lift::{FRAME_ORDER, FRAME_TOL};
use ballmaps_core::normalize::RANK_TOL;
use ballmaps_core::sff::VANISH_TOL;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "ballmaps",
    version,
    about = "Invariants of proper rational maps between balls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Geometric rank at sample points and its maximum κ₀.
    Rank(MapArgs),
    /// Partial and full normal forms at one point.
    Normalize(MapArgs),
    /// Second fundamental form by adapted frames and by osculating spaces.
    Sff(MapArgs),
    /// Flatness verdict with a linear-fractional witness.
    Flat(MapArgs),
    /// Adapted lift residuals and Maurer–Cartan relations.
    Frame(FrameArgs),
    /// Membership of an automorphism matrix in SU(N+1,1) and GL^Q.
    CheckAut(AutArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Number of sample points.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    /// Halton stream for sample points.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative singular-value threshold for ranks.
    #[arg(long, default_value_t = RANK_TOL)]
    pub rank_tol: f64,
    /// Threshold below which a second fundamental form counts as zero.
    #[arg(long, default_value_t = VANISH_TOL)]
    pub vanish_tol: f64,
    /// Threshold for frame and membership residuals.
    #[arg(long, default_value_t = FRAME_TOL)]
    pub frame_tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Explicit base point `z1,..,zn,u` (repeatable); replaces sampling.
    #[arg(long = "point", value_name = "Z,..,U")]
    pub points: Vec<String>,
    /// Append wall-clock timing (breaks byte-reproducibility).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug)]
struct MapArgs {
    map: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct FrameArgs {
    map: PathBuf,
    #[arg(long, value_enum, default_value_t = LiftChoice::General)]
    lift: LiftChoice,
    /// Truncation order of the lift.
    #[arg(long, default_value_t = FRAME_ORDER)]
    order: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct AutArgs {
    automorphism: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftChoice {
    General,
    Spherical,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let (outcome, common) = match &cli.command {
        Command::Rank(a) => (commands::rank(&a.map, &a.common), &a.common),
        Command::Normalize(a) => (commands::normalize(&a.map, &a.common), &a.common),
        Command::Sff(a) => (commands::sff(&a.map, &a.common), &a.common),
        Command::Flat(a) => (commands::flat(&a.map, &a.common), &a.common),
        Command::Frame(a) => (
            commands::frame(&a.map, a.lift, a.order, &a.common),
            &a.common,
        ),
        Command::CheckAut(a) => (commands::check_aut(&a.automorphism, &a.common), &a.common),
    };
    match outcome {
        Ok((mut report, code)) => {
            if common.timing {
                report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            match common.format {
                Format::Json => println!("{}", report.to_json()),
                Format::Text => print!("{}", report.to_text()),
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
