use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use saddlepoint_harness::config::{ExperimentConfig, ModeName};
use saddlepoint_harness::error::{HarnessError, Result};
use saddlepoint_harness::run;

/// Runs, sweeps and validates the minimax solvers.
///
/// Exit codes: 0 success, 1 other failure (including a failed validation
/// suite), 2 configuration error, 3 violated solver precondition, 4 inner
/// iteration cap.
#[derive(Parser, Debug)]
#[command(name = "saddlepoint", version)]
struct Cli {
    /// Replace the config's seed list with this seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeName>,
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run each seed and solver of a config once.
    Solve {
        config: PathBuf,
        /// Override the config's epsilon.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run a config's grid and write rows, medians and bound curves.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run a named invariant suite, or `all`.
    Validate { suite: String },
    /// Write the bound curves on a config's grid.
    Bounds {
        config: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

fn load(path: &Path, cli: &Cli, epsilon: Option<f64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    run::apply_overrides(&mut cfg, cli.seed, cli.mode, cli.out.clone());
    if let Some(e) = epsilon {
        cfg.epsilon = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stdout_write(text: &str) -> Result<()> {
    std::io::stdout().write_all(text.as_bytes()).map_err(|e| HarnessError::io("<stdout>", e))
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve { config, epsilon } => {
            let cfg = load(config, cli, *epsilon)?;
            let outcomes = run::run_solve(&cfg)?;
            match &cfg.output.dir {
                Some(dir) => run::write_solve(dir, &outcomes)?,
                None => {
                    let rows: Vec<_> = outcomes.iter().map(|o| o.row.clone()).collect();
                    stdout_write(&run::rows_to_csv(&rows)?)?;
                }
            }
        }
        Command::Sweep { config, epsilon } => {
            let cfg = load(config, cli, *epsilon)?;
            let result = run::run_sweep(&cfg)?;
            match &cfg.output.dir {
                Some(dir) => run::write_sweep(dir, &result)?,
                None => stdout_write(&run::rows_to_csv(&result.rows)?)?,
            }
        }
        Command::Validate { suite } => {
            let seed = cli.seed.unwrap_or(0);
            let records = run::validate(suite, seed)?;
            for rec in &records {
                for c in &rec.checks {
                    eprintln!(
                        "[{}] {} {} samples={} failures={} worst_ratio={:.6e}",
                        rec.suite,
                        c.name,
                        if c.passed { "PASS" } else { "FAIL" },
                        c.samples,
                        c.failures,
                        c.worst_ratio
                    );
                }
            }
            match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
                    run::write_json(&dir.join(format!("validate_{suite}.json")), &records)?;
                }
                None => stdout_write(&(serde_json::to_string_pretty(&records).expect("serializes") + "\n"))?,
            }
            if let Some(bad) = records.iter().find(|r| !r.passed) {
                return Err(HarnessError::SuiteFailed(bad.suite.clone()));
            }
        }
        Command::Bounds { config, epsilon } => {
            let cfg = load(config, cli, *epsilon)?;
            let base = cfg
                .instance
                .params()
                .ok_or_else(|| HarnessError::config("instance", "bounds need declared params"))?;
            let rows = match &cfg.grid {
                Some(g) => run::bound_rows(&base, g.parameter, &g.values, cfg.epsilon)?,
                None => run::bound_rows(
                    &base,
                    saddlepoint_harness::config::GridParameter::LXy,
                    &[base.l_xy],
                    cfg.epsilon,
                )?,
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r)?;
            }
            let text = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8");
            match &cfg.output.dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
                    let p = dir.join("bounds.csv");
                    std::fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))?;
                }
                None => stdout_write(&text)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
