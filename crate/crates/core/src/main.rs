use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};

use d2d_range::config::{load_scenario, Scenario};
use d2d_range::experiments::{self as exp, MatchedBudget};
use d2d_range::{Error, Result};

/// Energy-optimal maximum D2D range per content class.
#[derive(Debug, Parser)]
#[command(name = "d2d-range", version)]
struct Cli {
    /// Scenario file (JSON). Defaults to two non-delay-tolerant classes, φ = 0.2 and 0.8.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Base seed of the simulation realizations.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Number of simulated realizations.
    #[arg(long, global = true, value_name = "N")]
    realizations: Option<usize>,

    /// Output directory for CSV files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Comma-separated cost weights.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    w: Option<Vec<f64>>,

    /// Comma-separated ranges in meters.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    rmax: Option<Vec<f64>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic vs simulated energy of non-delay-tolerant classes.
    Validate,
    /// Energy curves of every class over a range grid.
    Sweep,
    /// Optimal range per class.
    Optimize,
    /// Per-class ranges against a single common range.
    Compare,
}

fn scenario(cli: &Cli) -> Result<Scenario> {
    let mut s = match &cli.config {
        Some(path) => load_scenario(path)?,
        None => Scenario::baseline(),
    };
    if let Some(seed) = cli.seed {
        s.simulation.base_seed = seed;
    }
    if let Some(n) = cli.realizations {
        if n == 0 {
            return Err(Error::Usage("--realizations must be at least 1".into()));
        }
        s.simulation.n_realizations = n;
    }
    if let Some(out) = &cli.out {
        s.output_dir = out.clone();
    }
    Ok(s)
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut s = scenario(cli)?;
    let out = s.output_dir.clone();
    match cli.command {
        Command::Validate => {
            let grid = cli.rmax.clone().unwrap_or_else(|| exp::VALIDATE_GRID_M.to_vec());
            let rows = exp::cmd_validate(&s, &grid)?;
            let path = exp::write_validate(&out, &rows)?;
            let failing = rows.iter().filter(|r| !r.passes()).count();
            let worst = rows.iter().map(|r| r.relative_difference.abs()).fold(0.0, f64::max);
            println!(
                "{} grid points, {} outside {:.0}% (largest |relative difference| {:.4})",
                rows.len(),
                failing,
                100.0 * exp::VALIDATION_TOLERANCE,
                worst
            );
            print_written(&[path]);
        }
        Command::Sweep => {
            let grid = cli.rmax.clone().unwrap_or_else(|| s.simulation.rmax_grid_m.clone());
            let weights = cli.w.clone().unwrap_or_else(|| exp::DEFAULT_SWEEP_WEIGHTS.to_vec());
            let report = exp::cmd_sweep(&s, &grid, &weights)?;
            for a in &report.argmin {
                println!(
                    "{} {} w={}: r_max={} m, cost={:e} J",
                    a.class_id,
                    a.source.as_str(),
                    a.w,
                    a.r_max_m,
                    a.cost_j
                );
            }
            print_written(&exp::write_sweep(&out, &report)?);
        }
        Command::Optimize => {
            if let Some(grid) = &cli.rmax {
                s.simulation.rmax_grid_m = grid.clone();
            }
            let weights = cli.w.clone().unwrap_or_else(|| exp::DEFAULT_SWEEP_WEIGHTS.to_vec());
            let rows = exp::cmd_optimize(&s, &weights)?;
            for r in &rows {
                println!(
                    "{} w={}: r_hat={:.2} m ({})",
                    r.class_id,
                    r.result.weight,
                    r.result.r_hat_m,
                    r.result.method.as_str()
                );
            }
            print_written(&[exp::write_optimize(&out, &rows)?]);
        }
        Command::Compare => {
            if let Some(grid) = &cli.rmax {
                s.simulation.rmax_grid_m = grid.clone();
            }
            let weights = cli.w.clone().unwrap_or_else(|| exp::DEFAULT_COMPARE_WEIGHTS.to_vec());
            let report = exp::cmd_compare(&s, &weights)?;
            for r in &report.rows {
                let matched = match r.matched {
                    MatchedBudget::Feasible {
                        r_m,
                        i2d_savings_pct,
                        ..
                    } => format!("matched r={r_m:.2} m, I2D savings {i2d_savings_pct:.1}%"),
                    MatchedBudget::Infeasible => "matched budget infeasible".into(),
                };
                println!(
                    "w={}: common r={:.2} m, I2D savings vs common optimum {:.1}%; {}",
                    r.w, r.common.r_hat_m, r.common_i2d_savings_pct, matched
                );
            }
            print_written(&exp::write_compare(&out, &report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
