use atmocirc::config::parse_config;
use atmocirc::mms::{verify_mms, MmsConfig};
use atmocirc::runner;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "atmocirc",
    version,
    about = "2D moist convection in a periodic channel: solver, nondimensionalization and verification checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the dimensionless groups derived from a [physical] block.
    Nondim {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a configuration, writing snapshots, diagnostics and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides [output] dir in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manufactured-solution convergence study; nonzero exit if any fitted
    /// order falls below the threshold.
    VerifyMms {
        /// Spatial grid ladder, e.g. 16x17,32x33,64x65.
        #[arg(long, default_value = "16x17,32x33,64x65")]
        grids: String,
        /// Final time of each run.
        #[arg(long, default_value_t = 0.25)]
        t_end: f64,
        /// Minimum acceptable fitted order.
        #[arg(long, default_value_t = 1.9)]
        threshold: f64,
    },
    /// Recompute diagnostics over the snapshots of an existing run.
    CheckTrajectory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dir: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<(atmocirc::config::RunConfig, PathBuf), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let config = parse_config(&text).map_err(|e| e.to_string())?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((config, base))
}

fn parse_grids(spec: &str) -> Result<Vec<(usize, usize)>, String> {
    spec.split(',')
        .map(|pair| {
            let (a, b) = pair
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| format!("bad grid `{pair}`, expected like 32x33"))?;
            let n1 = a.parse().map_err(|_| format!("bad n1 in `{pair}`"))?;
            let n2 = b.parse().map_err(|_| format!("bad n2 in `{pair}`"))?;
            Ok((n1, n2))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Nondim { config } => {
            let (config, _) = load_config(&config)?;
            let report = runner::nondim_report(&config).map_err(|e| e.to_string())?;
            print!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out } => {
            let (config, base) = load_config(&config)?;
            match runner::run(&config, &base, out.as_deref()) {
                Ok(summary) => {
                    println!(
                        "completed {} steps, {} snapshots in {}",
                        summary.steps,
                        summary.snapshots,
                        summary.out_dir.display()
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(e.exit_code() as u8))
                }
            }
        }
        Command::VerifyMms {
            grids,
            t_end,
            threshold,
        } => {
            let grids = parse_grids(&grids)?;
            let mms = MmsConfig {
                grids,
                t_end,
                ..MmsConfig::default()
            };
            let report = verify_mms(&mms);
            print!("{report}");
            if report.passes(threshold) {
                println!("all fitted orders >= {threshold}");
                Ok(ExitCode::SUCCESS)
            } else {
                println!(
                    "FAIL: minimum fitted order {:.3} < {threshold}",
                    report.min_order()
                );
                Ok(ExitCode::from(1))
            }
        }
        Command::CheckTrajectory { config, dir } => {
            let (config, base) = load_config(&config)?;
            let report =
                runner::check_trajectory(&config, &dir, &base).map_err(|e| e.to_string())?;
            print!("{}", report.render());
            println!(
                "{} snapshots checked: {}",
                report.snapshots,
                if report.passed { "pass" } else { "FAIL" }
            );
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
