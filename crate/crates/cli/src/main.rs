use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sgd_theta::operators::equally_spaced_angles;
use sgd_theta::penalty::PdhgConfig;
use sgd_theta_cli::commands::{self, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "sgd-theta", version, about = "Stochastic mirror-descent reconstructions for systems of ill-posed equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the methods of an experiment config and write CSVs, images and a manifest.
    Run {
        config: PathBuf,
        /// Run even when the step-size parameters are not admissible.
        #[arg(long)]
        force: bool,
        /// Output directory (overrides $SGD_THETA_OUT and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Full-residual telemetry every k iterations (default: one epoch).
        #[arg(long, value_name = "K")]
        stride: Option<u64>,
    },
    /// Run the adjoint, duality-map, derivative, TV-prox and monotonicity batteries.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the modified Shepp-Logan phantom.
    Phantom {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parallel-beam projection of a square image.
    Project {
        input: PathBuf,
        /// Number of equally spaced angles on (0, 180].
        #[arg(long, default_value_t = 45)]
        angles: usize,
        /// Detector lines per angle (default: image side).
        #[arg(long)]
        lines: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Total-variation denoising by PDHG.
    DenoiseTv {
        input: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, force, out, seed, stride } => {
            let summary = commands::cmd_run(&config, &RunOptions { force, out, seed, stride })?;
            for rep in &summary.admissibility {
                println!("admissibility: {rep}");
            }
            for m in &summary.methods {
                let err = m.final_rel_error.map_or_else(|| "n/a".to_string(), |e| format!("{e:.4}"));
                println!("{:<16} iterations {:>8}  stop {:?}  rel. error {err}", m.label, m.iterations, m.stop);
            }
            println!("artifacts in {}", summary.out_dir.display());
            Ok(())
        }
        Command::Check { seed } => {
            let checks = commands::cmd_check(seed)?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Usage(format!("{failed} of {} checks failed", checks.len())));
            }
            Ok(())
        }
        Command::Phantom { n, out } => commands::write_phantom(&out, n),
        Command::Project { input, angles, lines, out } => {
            let (_, header) = sgd_theta::sampling::read_array(&input)?;
            let lines = lines.or(header.dims.first().copied()).unwrap_or(1);
            commands::project_file(&input, &out, &equally_spaced_angles(angles), lines)
        }
        Command::DenoiseTv { input, beta, iters, tol, out } => {
            let pdhg = PdhgConfig { max_iters: iters, gap_tol: tol, ..PdhgConfig::default() };
            commands::denoise_file(&input, &out, beta, &pdhg)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
