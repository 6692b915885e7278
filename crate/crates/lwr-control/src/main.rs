//! Command-line interface for the boundary-control simulator.
//!
//! Exit codes: 0 on success, 1 for configuration problems, 2 for runtime or
//! I/O failures, 3 when `oracle-check` finds a solver/oracle mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lwr_control::{
    audit_side, convexity_split, export_csv, export_plots, output::run_summary, parse_config,
    run_scenario, ScenarioConfig, Side,
};

#[derive(Parser)]
#[command(
    name = "lwr-control",
    version,
    about = "Single-boundary control of the LWR traffic model: Godunov simulation, interval analysis, and controller audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed-loop scenario and export CSV tables and SVG plots.
    Run {
        /// Scenario file (flat `key = value` lines).
        config: PathBuf,
    },
    /// Print the convexity split points and the four admissible interval sets.
    Intervals {
        config: PathBuf,
    },
    /// Check the configured flux against the admissibility assumptions.
    ValidateFlux {
        config: PathBuf,
    },
    /// Audit the case-analysis solvers against the grid-scan oracle on
    /// seeded random instances.
    OracleCheck {
        config: PathBuf,
        /// Random instances per boundary side.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Oracle scan points per admissible interval.
        #[arg(long, default_value_t = 2000)]
        resolution: usize,
    },
    /// Re-run the scenario once per value of one config key, in parallel.
    Sweep {
        config: PathBuf,
        /// Config key to vary (e.g. `u_star`, `n_cells`, `kappa_V`).
        #[arg(long)]
        param: String,
        /// One run per value, written to `<out_dir>/<param>_<value>/`.
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            err.exit_code()
        }
    }
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            run_and_export(&cfg).map(|_| ExitCode::SUCCESS)
        }
        Command::Intervals { config } => {
            let cfg = load_config(&config)?;
            let model = cfg
                .build_model()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let stability = convexity_split(&model, cfg.u_star)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let invariance = convexity_split(&model, 0.0)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("flux = {} (u_max = {})", model.kind(), model.u_max());
            println!("u_hat = {}", model.u_hat());
            println!("u_star = {}", cfg.u_star);
            match stability.split_point {
                Some(u1) => println!("u1 = {u1}"),
                None => println!("u1 = (non-contiguous partition)"),
            }
            match invariance.split_point {
                Some(u2) => println!("u2 = {u2}"),
                None => println!("u2 = (non-contiguous partition)"),
            }
            println!("stability_left   = {}", format_set(&stability.left_set));
            println!("stability_right  = {}", format_set(&stability.right_set));
            println!("invariance_left  = {}", format_set(&invariance.left_set));
            println!("invariance_right = {}", format_set(&invariance.right_set));
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateFlux { config } => {
            let cfg = load_config(&config)?;
            let model = cfg
                .build_model()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let report = model.validate(1000);
            println!("{report}");
            if report.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::OracleCheck {
            config,
            samples,
            seed,
            resolution,
        } => {
            let cfg = load_config(&config)?;
            let model = cfg
                .build_model()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let mut all_passed = true;
            for side in [Side::Left, Side::Right] {
                let report = audit_side(&model, side, samples, seed, resolution)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                println!(
                    "{:?}: {} samples, {} feasible, max value diff {:.3e}, {} mismatches",
                    side,
                    report.samples,
                    report.feasible_count,
                    report.max_value_diff,
                    report.mismatches.len()
                );
                if let Some(m) = report.mismatches.first() {
                    println!("  first mismatch: {m:?}");
                }
                all_passed &= report.passed();
            }
            if all_passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let base = load_config(&config)?;
            // Validate every override up front so a typo fails fast.
            let mut runs: Vec<(String, ScenarioConfig)> = Vec::new();
            for value in &values {
                let mut cfg = base.clone();
                cfg.apply(&param, value)
                    .and_then(|_| cfg.validate())
                    .map_err(|e| CliError::Config(format!("--param {param} = {value}: {e}")))?;
                cfg.out_dir = base.out_dir.join(format!("{param}_{value}"));
                runs.push((value.clone(), cfg));
            }
            let results: Vec<(String, Result<String, CliError>)> = std::thread::scope(|scope| {
                let handles: Vec<_> = runs
                    .iter()
                    .map(|(value, cfg)| {
                        let value = value.clone();
                        let handle = scope.spawn(move || run_and_export(cfg));
                        (value, handle)
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|(value, handle)| {
                        let res = handle.join().unwrap_or_else(|_| {
                            Err(CliError::Runtime("worker panicked".to_string()))
                        });
                        (value, res)
                    })
                    .collect()
            });
            let mut failed = false;
            for (value, result) in results {
                match result {
                    Ok(out_dir) => println!("{param} = {value}: ok ({out_dir})"),
                    Err(e) => {
                        failed = true;
                        eprintln!("{param} = {value}: {e}");
                    }
                }
            }
            if failed {
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}

fn run_and_export(cfg: &ScenarioConfig) -> Result<String, CliError> {
    let log = run_scenario(cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    let csv = cfg.out_dir.join("timeseries.csv");
    export_csv(&log, &csv).map_err(|e| CliError::Runtime(format!("export csv: {e}")))?;
    export_plots(&log, &cfg.out_dir)
        .map_err(|e| CliError::Runtime(format!("export plots: {e}")))?;
    print!("{}", run_summary(&log));
    println!("wrote {}", csv.display());
    Ok(cfg.out_dir.display().to_string())
}

fn format_set(intervals: &[lwr_control::Interval]) -> String {
    if intervals.is_empty() {
        return "{}".to_string();
    }
    intervals
        .iter()
        .map(|iv| format!("[{}, {}]", iv.lo, iv.hi))
        .collect::<Vec<_>>()
        .join(" ∪ ")
}
