use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cvt_cli::commands::{self, DEFAULT_GRID_RES};
use cvt_cli::{CliError, Scenario, SolveOptions};

/// Product centroidal Voronoi tessellations of boxes.
#[derive(Parser, Debug)]
#[command(name = "cvt", version, about)]
struct Cli {
    /// Cap on worker threads (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a scenario and write centroids, cells and a JSON report
    Solve {
        config: PathBuf,
        /// Exit with status 3 if the centroidality residual exceeds 1e-6
        #[arg(long)]
        verify: bool,
        /// Rescale every marginal to unit mass
        #[arg(long)]
        normalized: bool,
        /// Directory for the output files
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run the high-dimensional benchmark (`table1` or a rows file)
    Bench {
        name: String,
        /// Also write the table as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario's tessellation against the grid Lloyd oracle
    Verify {
        config: PathBuf,
        /// Oracle grid points per dimension; the check also runs at twice this
        #[arg(long, default_value_t = DEFAULT_GRID_RES)]
        grid_res: usize,
        /// Verify centroids from a file written by `solve` instead of solving
        #[arg(long)]
        centroids: Option<PathBuf>,
        #[arg(long)]
        normalized: bool,
    },
    /// Write scatter and cell-boundary CSVs for external plotting
    Plotdata {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        normalized: bool,
    },
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    let mut s = Scenario::load(path)?;
    s.apply_seed_override()?;
    Ok(s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Solve {
            config,
            verify,
            normalized,
            out_dir,
        } => commands::cmd_solve(
            &load(&config)?,
            &SolveOptions {
                verify,
                normalized,
                out_dir,
            },
        ),
        Command::Bench { name, out } => {
            let rows = commands::load_bench(&name)?;
            let results = commands::run_bench(&rows, &cvt_core::SolverConfig::default())?;
            print!("{}", commands::bench_markdown(&results));
            if let Some(path) = out {
                if path.extension().is_some_and(|e| e == "md") {
                    std::fs::write(&path, commands::bench_markdown(&results))
                        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                } else {
                    commands::write_bench_csv(&path, &results)?;
                }
            }
            Ok(())
        }
        Command::Verify {
            config,
            grid_res,
            centroids,
            normalized,
        } => commands::cmd_verify(&load(&config)?, grid_res, centroids.as_deref(), normalized)
            .map(|_| ()),
        Command::Plotdata {
            config,
            out_dir,
            normalized,
        } => commands::cmd_plotdata(&load(&config)?, &out_dir, normalized).map(|_| ()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
