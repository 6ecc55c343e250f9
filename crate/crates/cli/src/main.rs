//! Command-line front end: run scenarios from config files (or the built-in
//! registry), validate configs, and emit the CSV/JSON artifacts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use chj_core::model::check_assumptions;
use chj_core::multiplier::Route;
use chj_core::runner::{run_scenario, RunOverrides};
use chj_core::scenario::{build_scenario, builtin, builtin_names, parse_config, Scenario};

#[derive(Parser)]
#[command(name = "chj", version, about = "Constrained Hamilton-Jacobi solver suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        /// Path to a TOML scenario config.
        #[arg(long, conflicts_with = "scenario")]
        config: Option<PathBuf>,
        /// Name of a built-in scenario instead of a config file.
        #[arg(long)]
        scenario: Option<String>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid-refinement multiplier: n_cells * k, fixed step sizes / k.
        #[arg(long)]
        refine: Option<u32>,
        /// Comma-separated route filter, e.g. fd,sl.
        #[arg(long, value_delimiter = ',')]
        routes: Option<Vec<String>>,
        /// Print progress details.
        #[arg(short, long, action = clap::ArgAction::Count)]
        verbose: u8,
    },
    /// Parse and validate a config, run the assumption checks, and print the
    /// report without any time stepping.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a built-in scenario config (or list the registry).
    Builtin {
        /// Name of the scenario; omit together with --list to enumerate.
        name: Option<String>,
        /// Write the config next to stdout output.
        #[arg(long)]
        write: Option<PathBuf>,
        #[arg(long)]
        list: bool,
    },
}

fn parse_routes(names: &[String]) -> Result<Vec<Route>> {
    names
        .iter()
        .map(|n| match n.as_str() {
            "fd" => Ok(Route::Fd),
            "sl" => Ok(Route::Sl),
            "eps" => Ok(Route::Eps),
            other => bail!("unknown route {other:?} (expected fd, sl, or eps)"),
        })
        .collect()
}

fn load_config(
    config: &Option<PathBuf>,
    scenario: &Option<String>,
) -> Result<(chj_core::scenario::ScenarioConfig, PathBuf)> {
    match (config, scenario) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let cfg = parse_config(&text)?;
            let base = path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            Ok((cfg, base))
        }
        (None, Some(name)) => {
            let cfg = builtin(name).with_context(|| {
                format!(
                    "no built-in scenario {name:?}; available: {}",
                    builtin_names().join(", ")
                )
            })?;
            Ok((cfg, PathBuf::from(".")))
        }
        _ => bail!("exactly one of --config or --scenario is required"),
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            scenario,
            out,
            refine,
            routes,
            verbose,
        } => {
            let (cfg, base) = load_config(&config, &scenario)?;
            let overrides = RunOverrides {
                output_dir: out,
                refine,
                routes: routes.as_deref().map(parse_routes).transpose()?,
            };
            if verbose > 0 {
                eprintln!(
                    "running scenario {:?} (n = {}, horizon = {})",
                    cfg.name, cfg.grid.n, cfg.horizon
                );
            }
            let started = std::time::Instant::now();
            let outcome = run_scenario(&cfg, &base, &overrides)?;
            if verbose > 0 {
                eprintln!("finished in {:.1?}", started.elapsed());
            }
            for e in &outcome.diagnostics.entries {
                let status = match e.passed {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "n/a ",
                };
                println!("{status}  {}  (value {:.6e})", e.name, e.witness_value);
            }
            println!("report: {}", outcome.report_path.display());
            Ok(if outcome.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Check { config } => {
            let (cfg, base) = load_config(&Some(config), &None)?;
            let scenario: Scenario<f64> = build_scenario(&cfg, &base)?;
            let report = check_assumptions(&scenario.model, &scenario.assumption_box)?;
            println!("scenario {:?}: config valid", scenario.name);
            let (a, b) = scenario.grid.bounds(0);
            println!("grid [{a}, {b}] with {} cells", scenario.grid.n_cells(0));
            for e in &report.entries {
                let status = match e.passed {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "n/a ",
                };
                println!("{status}  {}  (worst {:.6e})", e.name, e.worst.value);
            }
            Ok(if report.hard_failures().is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Builtin { name, write, list } => {
            if list || name.is_none() {
                for n in builtin_names() {
                    println!("{n}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let name = name.unwrap();
            let text = match name.as_str() {
                "quadratic" => chj_core::scenario::QUADRATIC_TOML,
                "moving-optimum" => chj_core::scenario::MOVING_OPTIMUM_TOML,
                "jump" => chj_core::scenario::JUMP_TOML,
                "kernel-gaussian" => chj_core::scenario::KERNEL_GAUSSIAN_TOML,
                other => bail!(
                    "no built-in scenario {other:?}; available: {}",
                    builtin_names().join(", ")
                ),
            };
            match write {
                Some(path) => {
                    std::fs::write(&path, text.trim_start())
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{}", text.trim_start()),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
