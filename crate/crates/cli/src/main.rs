//! `manyexperts`: run seeded expert-advice games, sweep them over grids,
//! check regret bounds and export environments.
//!
//! Exit codes: 0 success, 1 bound violation, 2 configuration error,
//! 3 I/O error.

mod config;
mod error;
mod run;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use manyexperts::environments::{export_environment, MatrixFormat};
use manyexperts::validation::{run_suite, Suite};

use crate::config::{decode, load_run, load_table, resolve_paths, EnvironmentOnly};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "manyexperts",
    version,
    about = "Prediction with expert advice for very large expert sets"
)]
struct Cli {
    /// Worker threads for sweeps and validation (default: all cores).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

impl From<Format> for MatrixFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => MatrixFormat::Csv,
            Format::Binary => MatrixFormat::Binary,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Play one game and write trajectory.csv, summary.json and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides `game.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Config override, e.g. `--set game.epsilon=0.25`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a grid of seeds x accuracies x algorithms x environment parameters.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run bound-validation suites and report measured values against bounds.
    Validate {
        /// Suite names, or `all`.
        #[arg(required = true)]
        suites: Vec<String>,
        #[arg(long)]
        seed: u64,
        /// Also write the reports as validate.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write an environment's loss matrix, ground truth and JSON sidecar.
    ExportEnv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// File stem (default: the environment kind).
        #[arg(long)]
        stem: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn validate(names: &[String], seed: u64, out_dir: Option<&Path>) -> CliResult<()> {
    let suites: Vec<Suite> = if names.iter().any(|n| n == "all") {
        Suite::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| {
                n.parse::<Suite>()
                    .map_err(|e| CliError::config("suite", e.to_string()))
            })
            .collect::<CliResult<_>>()?
    };
    let mut reports = Vec::new();
    for suite in suites {
        let report = run_suite(suite, seed)?;
        print!("{report}");
        reports.push(report);
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        run::write_json(&reports, &dir.join("validate.json"))?;
    }
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.suite.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::BoundViolation(format!(
            "suites failed: {}",
            failed.join(", ")
        )))
    }
}

fn export(
    config: &Path,
    overrides: &[String],
    seed: Option<u64>,
    out_dir: &Path,
    format: Format,
    stem: Option<String>,
) -> CliResult<()> {
    let table = load_table(config, overrides)?;
    let file: EnvironmentOnly = decode(&table, config)?;
    let spec = resolve_paths(file.environment, config);
    let seed = seed.or(spec.seed()).or_else(|| {
        file.game
            .as_ref()?
            .get("seed")?
            .as_integer()
            .map(|s| s as u64)
    });
    let spec = match seed {
        Some(s) => spec.with_default_seed(s),
        None if matches!(
            spec,
            manyexperts::environments::EnvironmentSpec::FiniteMatrix { .. }
        ) =>
        {
            spec
        }
        None => {
            return Err(CliError::config(
                "environment.seed",
                "no seed given in the config or via --seed",
            ))
        }
    };
    let env = spec.build(0)?;
    std::fs::create_dir_all(out_dir)?;
    let stem = stem.unwrap_or_else(|| spec.kind().to_string());
    let sidecar = export_environment(&env, &spec, out_dir, &stem, format.into())?;
    println!(
        "wrote {} ({} x {})",
        out_dir.join(&sidecar.matrix).display(),
        sidecar.rounds,
        sidecar.experts
    );
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.parallelism {
        if n == 0 {
            return Err(CliError::config("--parallelism", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--parallelism", e.to_string()))?;
    }
    match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            overrides,
        } => {
            let run = load_run(&config, &overrides, seed)?;
            run::cmd_run(&run, &out_dir).map(|_| ())
        }
        Command::Sweep {
            config,
            seed,
            out_dir,
            overrides,
        } => {
            let table = load_table(&config, &overrides)?;
            sweep::cmd_sweep(&config, &table, seed, &out_dir)
        }
        Command::Validate {
            suites,
            seed,
            out_dir,
        } => validate(&suites, seed, out_dir.as_deref()),
        Command::ExportEnv {
            config,
            seed,
            out_dir,
            format,
            stem,
            overrides,
        } => export(&config, &overrides, seed, &out_dir, format, stem),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
