use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use qmetro::commands::{cmd_baselines, cmd_diagnose, cmd_run, cmd_sweep, Options};
use qmetro::grid::{default_grid, parse_grid};
use qmetro::Config;
use qmetro_core::optimize::SweepAxis;

#[derive(Parser)]
#[command(
    name = "qmetro",
    version,
    about = "Variational photonic phase-estimation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimizer seed; overrides `[optimizer] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for restarts (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall-clock time per row.
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn load(&self) -> anyhow::Result<(Config, Options)> {
        let config = Config::load(&self.config)?;
        let options = Options {
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            timing: self.timing,
        };
        Ok((config, options))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one configuration.
    Run(Common),
    /// Warm-started chain of runs along one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// over_N, over_d, over_kappa or over_ubound.
        #[arg(long)]
        axis: String,
        /// `4,6,8`, `lin:a:b:n` or `log:a:b:n`; defaults depend on the axis.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Benchmark states without optimization over a photon-number grid.
    Baselines {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "2,4,6,8,10,12")]
        grid: String,
    },
    /// Re-prepare the state of a manifest and report its diagnostics.
    Diagnose {
        manifest: PathBuf,
        /// Directory for `<manifest>.report.json`; prints to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(common) => {
            let (config, options) = common.load()?;
            let out = cmd_run(&config, &options)?;
            let r = &out.record;
            println!(
                "qfi {:.6} cfi {:.6} qfi_exact {:.6} evals {}{}",
                r.qfi,
                r.cfi,
                r.qfi_exact,
                r.evals,
                if r.converged { "" } else { " (not converged)" }
            );
            println!("manifest {}", out.manifest.display());
            println!("csv {}", out.csv.display());
        }
        Command::Sweep { common, axis, grid } => {
            let (config, options) = common.load()?;
            let Some(axis) = SweepAxis::from_name(&axis) else {
                bail!("unknown axis `{axis}` (expected over_N, over_d, over_kappa or over_ubound)");
            };
            let grid = match grid {
                Some(g) => parse_grid(&g)?,
                None => default_grid(axis),
            };
            let out = cmd_sweep(&config, axis, &grid, &options)?;
            for row in &out.rows {
                match (row.qfi, &row.error) {
                    (Some(q), _) => println!(
                        "{} = {}: qfi {q:.6} cfi {:.6}",
                        axis.name(),
                        row.value.unwrap_or_default(),
                        row.cfi.unwrap_or_default()
                    ),
                    (None, e) => println!(
                        "{} = {}: failed ({})",
                        axis.name(),
                        row.value.unwrap_or_default(),
                        e.as_deref().unwrap_or("unknown error")
                    ),
                }
            }
            println!("csv {}", out.csv.display());
        }
        Command::Baselines { common, grid } => {
            let (config, options) = common.load()?;
            let grid = parse_grid(&grid)?;
            let out = cmd_baselines(&config, &grid, &options)?;
            println!("csv {}", out.csv.display());
        }
        Command::Diagnose { manifest, out } => {
            let (report, written) = cmd_diagnose(&manifest, out.as_deref())
                .with_context(|| format!("diagnosing {}", manifest.display()))?;
            match written {
                Some(path) => println!("report {}", path.display()),
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
    }
    Ok(())
}
