use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use cef_cli::commands::{self, DensityInput};
use cef_cli::{CliError, CliResult};
use cef_core::par::ExecPolicy;

/// Conformal embedding flows: train, sample, evaluate densities, verify.
#[derive(Parser)]
#[command(name = "cef", version)]
struct Cli {
    /// Evaluate batches on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the warmup / main / fine-tune schedule from a TOML config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples g(h(z)) from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `.csv` for text, anything else for the binary format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Log-density and reconstruction error on a (φ,θ) grid or a points file.
    #[command(group(ArgGroup::new("input").required(true).args(["grid", "points"])))]
    Density {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `NPHIxNTHETA` cell-centred grid on the unit sphere.
        #[arg(long, value_parser = commands::parse_grid)]
        grid: Option<(usize, usize)>,
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a property suite (conformality, composition, roundtrip, gradcheck,
    /// normalization, oracle, all).
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Describe a checkpoint.
    Info {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    cef_cli::init_threads()?;
    let policy = if cli.sequential { ExecPolicy::Sequential } else { ExecPolicy::Parallel };
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Train { config, seed, out: dir } => {
            commands::train(&config, seed, dir.as_deref(), policy, &mut out).map(|_| ())
        }
        Command::Sample { checkpoint, count, seed, out: path } => {
            commands::sample_cmd(&checkpoint, count, seed, &path, policy)
        }
        Command::Density { checkpoint, grid, points, out: path } => {
            let input = match (grid, points) {
                (Some((n_phi, n_theta)), _) => DensityInput::Grid { n_phi, n_theta },
                (None, Some(p)) => DensityInput::Points(p),
                (None, None) => unreachable!("clap requires one input"),
            };
            let n = commands::density(&checkpoint, &input, &path, policy)?;
            writeln!(out, "wrote {n} rows to {}", path.display()).map_err(|e| CliError::io(&path, e))
        }
        Command::Verify { suite, seed } => commands::verify(&suite, seed, &mut out),
        Command::Info { checkpoint } => commands::info(&checkpoint, &mut out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cef: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
