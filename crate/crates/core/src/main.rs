use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paraboloid_lab::cli::{self, Params, EXPERIMENTS};
use paraboloid_lab::LabError;

/// Numerical experiments for the Fourier extension operator on the paraboloid.
#[derive(Parser)]
#[command(name = "plab", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write rows.csv, summary.json and config.resolved.
    Run {
        experiment: String,
        /// TOML parameter file; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a parameter, e.g. `--set s=5` or `--set quad.tol=1e-9`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the available experiments.
    List,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::List => {
            for (name, about) in EXPERIMENTS {
                println!("{name:<18} {about}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { experiment, config, set, out } => {
            let code = match run(&experiment, config, &set, &out) {
                Ok(code) => code,
                Err(e) => {
                    eprintln!("error: {e}");
                    cli::error_exit_code(&e)
                }
            };
            ExitCode::from(code as u8)
        }
    }
}

fn run(experiment: &str, config: Option<PathBuf>, set: &[String], out: &std::path::Path) -> Result<i32, LabError> {
    let text = match config {
        Some(path) => std::fs::read_to_string(&path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let params = Params::from_toml(&text, set)?;
    let (report, dir) = cli::run(experiment, &params, out)?;
    for c in &report.checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        let gate = if c.gating { "" } else { " (informational)" };
        let crit = c.criterion.map(|n| format!("[{n}] ")).unwrap_or_default();
        println!("{status} {crit}{}: {:.4e} {} {:.4e}{gate}", c.name, c.measured, c.relation, c.threshold);
    }
    println!("{} rows, {:.1} s -> {}", report.rows.len(), report.wall_time_s, dir.display());
    Ok(cli::exit_code(&report))
}
