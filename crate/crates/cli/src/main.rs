use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dwmgipt::{detect, eval, synth};

/// Small infrared target detection with a double-weighted multi-granularity
/// patch tensor.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Separate frames into target and background and segment targets.
    Detect {
        /// key = value run configuration; an empty file means defaults.
        #[arg(long)]
        config: PathBuf,
        /// An image file, or a directory of .pgm/.pnm/.png frames.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-iteration solver trace of every frame.
        #[arg(long)]
        trace: bool,
    },
    /// Score a detect output directory against annotations.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        /// Annotations CSV with columns frame,cx,cy,a,b.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic scenes with ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Detect {
            config,
            input,
            out,
            trace,
        } => {
            let summary = detect::run(&detect::DetectOptions {
                config,
                input,
                out,
                trace,
            })?;
            for (path, e) in &summary.failures {
                eprintln!("error: {}: {e:#}", path.display());
            }
            println!("{}", summary.line());
            Ok(if summary.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Eval { pred, gt, out } => {
            let summary = eval::run(&eval::EvalOptions { pred, gt, out })?;
            println!("{}", summary.line());
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { spec, out } => {
            let frames = synth::run(&synth::SynthOptions { spec, out })?;
            println!("frames={}", frames.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}
