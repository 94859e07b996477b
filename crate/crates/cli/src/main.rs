use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mras_cli::config::ExperimentConfig;
use mras_cli::experiment::{run_experiment, run_scan, ScanAxis};
use mras_core::io::fmt_float;
use mras_core::CoreError;

/// Online identification of a space-dependent coefficient in a nonlinear
/// parabolic model, with built-in verification of the decay guarantees.
#[derive(Parser)]
#[command(name = "mras", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        /// Path to the JSON experiment config.
        config: PathBuf,
        /// Output directory for CSV/JSON artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the noise seed (requires a noise section).
        #[arg(long)]
        seed: Option<u64>,
        /// Exit nonzero when any verification check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Run one experiment per value of a swept parameter.
    Scan {
        config: PathBuf,
        /// Swept parameter: delta, sp_width, ti_window, n, or dt.
        #[arg(long)]
        axis: ScanAxis,
        /// Comma-separated values for the axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a config without running anything.
    Validate { config: PathBuf },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        match cfg.noise.as_mut() {
            Some(n) => n.seed = s,
            None => return Err("--seed given but the config has no noise section".to_string()),
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    // Die quietly when the consumer of a pipe hangs up, like any other
    // stream-friendly tool, instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            strict,
        } => {
            let cfg = match load_config(&config, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match run_experiment(&cfg, &out) {
                Ok(summary) => {
                    println!(
                        "energy {} -> {} (plateau {})",
                        fmt_float(summary.energy_initial),
                        fmt_float(summary.energy_final),
                        fmt_float(summary.energy_plateau)
                    );
                    println!(
                        "coefficient error {}",
                        fmt_float(summary.final_coefficient_error)
                    );
                    match summary.omega_hat {
                        Some(w) => println!(
                            "decay rate: fitted {} vs predicted {}",
                            fmt_float(w),
                            fmt_float(summary.omega_predicted)
                        ),
                        None => println!(
                            "decay rate: fit unavailable, predicted {}",
                            fmt_float(summary.omega_predicted)
                        ),
                    }
                    if summary.lookahead_steps > 0 {
                        println!(
                            "online latency: {} step(s) of smoothing lookahead",
                            summary.lookahead_steps
                        );
                    }
                    let failures = summary.report.failures();
                    println!(
                        "checks: {} of {} passed (see {})",
                        summary.report.entries.len() - failures.len(),
                        summary.report.entries.len(),
                        summary.out_dir.join("report.txt").display()
                    );
                    if strict && !failures.is_empty() {
                        for f in failures {
                            eprintln!("failed: {}", f.name);
                        }
                        return ExitCode::from(EXIT_VERIFICATION);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run failed: {e:#}");
                    let code = match e.downcast_ref::<CoreError>() {
                        Some(CoreError::BlowUp { .. }) => EXIT_SOLVER,
                        Some(_) => EXIT_CONFIG,
                        None if e.to_string().contains("invalid config") => EXIT_CONFIG,
                        None => EXIT_SOLVER,
                    };
                    ExitCode::from(code)
                }
            }
        }
        Command::Scan {
            config,
            axis,
            values,
            out,
            seed,
        } => {
            let cfg = match load_config(&config, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match run_scan(&cfg, axis, &values, &out) {
                Ok(rows) => {
                    for row in &rows {
                        println!(
                            "{axis}={} status={} plateau={} omega_hat={} checks={}/{}",
                            fmt_float(row.value),
                            row.status,
                            fmt_float(row.energy_plateau),
                            fmt_float(row.omega_hat),
                            row.checks_passed,
                            row.checks_total
                        );
                    }
                    println!("wrote {}", out.join("scan.csv").display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("scan failed: {e:#}");
                    ExitCode::from(EXIT_SOLVER)
                }
            }
        }
        Command::Validate { config } => match load_config(&config, None) {
            Ok(cfg) => {
                let spec = cfg.build_spec();
                let report = mras_core::problem::validate_problem(&spec, None);
                print!("{}", mras_core::io::render_report_text(&report));
                println!("configuration is well-formed");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
