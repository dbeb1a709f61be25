//! Experiment drivers behind the CLI subcommands.
//!
//! Each `cmd_*` function computes its table in memory; the matching `write_*`
//! function emits it as CSV. Numbers are formatted with Rust's shortest
//! round-trip representation, so identical inputs give identical bytes.

use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analytic::EnergyBreakdown;
use crate::config::{check_rmax_grid, Scenario};
use crate::error::{Error, Result};
use crate::optimizer::{
    minimize_cost, optimal_rmax, rmax_for_d2d_budget, AggregateCurve, AnalyticCurve, EnergyCurve,
    OptimizationResult, TabulatedCurve,
};
use crate::sim::{simulate_class_sweep, Realization, SimulatedBreakdown};
use crate::traffic::MixEntry;

/// Ranges checked by `validate` unless overridden.
pub const VALIDATE_GRID_M: [f64; 6] = [10.0, 20.0, 30.0, 50.0, 80.0, 120.0];
/// Largest accepted relative difference between simulated and analytic total energy.
pub const VALIDATION_TOLERANCE: f64 = 0.05;
pub const DEFAULT_SWEEP_WEIGHTS: [f64; 1] = [0.5];
pub const DEFAULT_COMPARE_WEIGHTS: [f64; 4] = [0.1, 0.4, 0.7, 0.9];

fn e(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

fn d(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn csv_writer(dir: &Path, name: &str) -> Result<(csv::Writer<File>, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((csv::Writer::from_path(&path)?, path))
}

fn check_weights(ws: &[f64]) -> Result<()> {
    if ws.is_empty() {
        return Err(Error::Usage("at least one weight is required".into()));
    }
    for &w in ws {
        crate::analytic::check_weight(w)?;
    }
    Ok(())
}

// Mix entries in output order: by class id.
fn sorted_entries(s: &Scenario) -> Vec<&MixEntry> {
    let mut v: Vec<&MixEntry> = s.mix.entries().iter().collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

fn simulate(s: &Scenario, entry: &MixEntry, grid: &[f64]) -> Result<Vec<SimulatedBreakdown>> {
    simulate_class_sweep(
        &entry.class,
        grid,
        s.simulation.n_realizations,
        &s.sim_context(),
        s.simulation.base_seed,
    )
}

fn tabulate(sims: &[SimulatedBreakdown]) -> Result<TabulatedCurve> {
    TabulatedCurve::new(
        sims.iter().map(|b| b.r_max_m).collect(),
        sims.iter().map(|b| b.mean).collect(),
    )
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateRow {
    pub class_id: String,
    pub phi: f64,
    pub r_max_m: f64,
    pub analytic: EnergyBreakdown,
    pub simulated: SimulatedBreakdown,
    /// `(simulated − analytic) / analytic` on the total energy.
    pub relative_difference: f64,
}

impl ValidateRow {
    pub fn passes(&self) -> bool {
        self.relative_difference.abs() <= VALIDATION_TOLERANCE
    }
}

/// Compares analytic and simulated energies of every non-delay-tolerant class.
pub fn cmd_validate(s: &Scenario, grid: &[f64]) -> Result<Vec<ValidateRow>> {
    check_rmax_grid("--rmax", grid).map_err(|e| Error::Usage(e.to_string()))?;
    let entries: Vec<&MixEntry> = sorted_entries(s)
        .into_iter()
        .filter(|e| !e.class.is_delay_tolerant())
        .collect();
    if entries.is_empty() {
        return Err(Error::Usage(
            "validate needs at least one class with timeout_s = 0".into(),
        ));
    }
    let model = s.analytic_model()?;
    let mut rows = Vec::new();
    for entry in entries {
        let sims = simulate(s, entry, grid)?;
        for sim in sims {
            let analytic = model.energy_breakdown(sim.r_max_m, &entry.class)?;
            rows.push(ValidateRow {
                class_id: entry.id.clone(),
                phi: entry.class.popularity(),
                r_max_m: sim.r_max_m,
                relative_difference: (sim.mean.e_total_j - analytic.e_total_j) / analytic.e_total_j,
                analytic,
                simulated: sim,
            });
        }
    }
    Ok(rows)
}

pub const VALIDATE_COLUMNS: [&str; 12] = [
    "class_id",
    "phi",
    "r_max_m",
    "analytic_e_d2d_j",
    "analytic_e_i2d_j",
    "analytic_e_total_j",
    "simulated_e_d2d_j",
    "simulated_e_i2d_j",
    "simulated_e_total_j",
    "simulated_stderr_total_j",
    "relative_difference",
    "pass",
];

pub fn write_validate(dir: &Path, rows: &[ValidateRow]) -> Result<PathBuf> {
    let (mut w, path) = csv_writer(dir, "validate.csv")?;
    w.write_record(VALIDATE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.class_id.clone(),
            d(r.phi),
            d(r.r_max_m),
            e(r.analytic.e_d2d_j),
            e(r.analytic.e_i2d_j),
            e(r.analytic.e_total_j),
            e(r.simulated.mean.e_d2d_j),
            e(r.simulated.mean.e_i2d_j),
            e(r.simulated.mean.e_total_j),
            e(r.simulated.stderr_total_j),
            d(r.relative_difference),
            r.passes().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Analytic,
    Simulated,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Analytic => "analytic",
            Source::Simulated => "simulated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub class_id: String,
    pub r_max_m: f64,
    pub source: Source,
    pub breakdown: EnergyBreakdown,
    /// Present for simulated rows.
    pub simulated: Option<SimulatedBreakdown>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgminRow {
    pub class_id: String,
    pub source: Source,
    pub w: f64,
    pub r_max_m: f64,
    pub cost_j: f64,
    pub breakdown: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub argmin: Vec<ArgminRow>,
    /// Per-record dumps, `(class id, r_max, realization, outcome)`; only
    /// filled when the scenario asks for them.
    pub records: Vec<(String, f64, u64, crate::sim::SimOutcome)>,
}

/// Analytic (non-delay-tolerant classes only) and simulated curves of every
/// class, plus the per-class argmin over `r_values` for each weight.
pub fn cmd_sweep(s: &Scenario, r_values: &[f64], weights: &[f64]) -> Result<SweepReport> {
    check_rmax_grid("--rmax", r_values).map_err(|e| Error::Usage(e.to_string()))?;
    check_weights(weights)?;
    let model = s.analytic_model()?;
    let mut rows = Vec::new();
    let mut argmin = Vec::new();
    let mut records = Vec::new();
    for entry in sorted_entries(s) {
        let analytic = if entry.class.is_delay_tolerant() {
            None
        } else {
            Some(
                r_values
                    .par_iter()
                    .map(|&r| model.energy_breakdown(r, &entry.class))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let sims = simulate(s, entry, r_values)?;
        for (j, &r) in r_values.iter().enumerate() {
            if let Some(a) = &analytic {
                rows.push(SweepRow {
                    class_id: entry.id.clone(),
                    r_max_m: r,
                    source: Source::Analytic,
                    breakdown: a[j],
                    simulated: None,
                });
            }
            rows.push(SweepRow {
                class_id: entry.id.clone(),
                r_max_m: r,
                source: Source::Simulated,
                breakdown: sims[j].mean,
                simulated: Some(sims[j]),
            });
        }
        for &w in weights {
            let mut curves = Vec::new();
            if let Some(a) = &analytic {
                curves.push((Source::Analytic, TabulatedCurve::new(r_values.to_vec(), a.clone())?));
            }
            curves.push((Source::Simulated, tabulate(&sims)?));
            for (source, curve) in curves {
                let best = curve.grid_argmin(w)?;
                argmin.push(ArgminRow {
                    class_id: entry.id.clone(),
                    source,
                    w,
                    r_max_m: best.r_hat_m,
                    cost_j: best.cost_value,
                    breakdown: best.breakdown,
                });
            }
        }
        if s.simulation.dump_records {
            for &r in r_values {
                for k in 0..s.simulation.n_realizations as u64 {
                    let seed = crate::sim::realization_seed(s.simulation.base_seed, k);
                    let real = Realization::draw(&entry.class, &s.layout, seed);
                    records.push((
                        entry.id.clone(),
                        r,
                        k,
                        real.outcome(&entry.class, r, &s.sim_context())?,
                    ));
                }
            }
        }
    }
    Ok(SweepReport {
        rows,
        argmin,
        records,
    })
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "class_id",
    "r_max_m",
    "source",
    "e_d2d_j",
    "e_i2d_j",
    "e_total_j",
    "offload_fraction",
    "stderr_d2d_j",
    "stderr_i2d_j",
    "stderr_total_j",
    "stderr_offload",
    "realizations",
    "empty_realizations",
];

pub const ARGMIN_COLUMNS: [&str; 9] = [
    "class_id",
    "source",
    "w",
    "r_max_m",
    "cost_j",
    "e_d2d_j",
    "e_i2d_j",
    "e_total_j",
    "offload_fraction",
];

pub const RECORD_COLUMNS: [&str; 10] = [
    "class_id",
    "r_max_m",
    "realization",
    "ue_index",
    "request_s",
    "delivery_s",
    "mode",
    "distance_m",
    "energy_j",
    "central",
];

/// Writes `sweep.csv`, `sweep_argmin.csv` and, if present, `records.csv`.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<Vec<PathBuf>> {
    let (mut w, sweep_path) = csv_writer(dir, "sweep.csv")?;
    w.write_record(SWEEP_COLUMNS)?;
    for r in &report.rows {
        let b = &r.breakdown;
        let mut rec = vec![
            r.class_id.clone(),
            d(r.r_max_m),
            r.source.as_str().to_string(),
            e(b.e_d2d_j),
            e(b.e_i2d_j),
            e(b.e_total_j),
            d(b.offload_fraction),
        ];
        match &r.simulated {
            Some(sim) => rec.extend([
                e(sim.stderr_d2d_j),
                e(sim.stderr_i2d_j),
                e(sim.stderr_total_j),
                d(sim.stderr_offload),
                sim.realizations.to_string(),
                sim.empty_realizations.to_string(),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let (mut w, argmin_path) = csv_writer(dir, "sweep_argmin.csv")?;
    w.write_record(ARGMIN_COLUMNS)?;
    for a in &report.argmin {
        w.write_record([
            a.class_id.clone(),
            a.source.as_str().to_string(),
            d(a.w),
            d(a.r_max_m),
            e(a.cost_j),
            e(a.breakdown.e_d2d_j),
            e(a.breakdown.e_i2d_j),
            e(a.breakdown.e_total_j),
            d(a.breakdown.offload_fraction),
        ])?;
    }
    w.flush()?;

    let mut paths = vec![sweep_path, argmin_path];
    if !report.records.is_empty() {
        let (mut w, path) = csv_writer(dir, "records.csv")?;
        w.write_record(RECORD_COLUMNS)?;
        for (id, r_max, k, outcome) in &report.records {
            for rec in &outcome.records {
                w.write_record([
                    id.clone(),
                    d(*r_max),
                    k.to_string(),
                    rec.ue_index.to_string(),
                    d(rec.request_time_s),
                    d(rec.delivery_time_s),
                    rec.mode.as_str().to_string(),
                    d(rec.distance_m),
                    e(rec.energy_j),
                    rec.in_central_cell.to_string(),
                ])?;
            }
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

// ---------------------------------------------------------------- optimize

/// Energy curve of one class: closed-form or simulated on a range grid.
pub enum ClassCurve<'a> {
    Analytic(AnalyticCurve<'a>),
    Simulated(TabulatedCurve),
}

impl ClassCurve<'_> {
    pub fn as_curve(&self) -> &dyn EnergyCurve {
        match self {
            ClassCurve::Analytic(c) => c,
            ClassCurve::Simulated(c) => c,
        }
    }

    /// Golden-section refinement for closed-form curves, grid argmin for simulated ones.
    pub fn optimize(&self, w: f64, s: &Scenario) -> Result<OptimizationResult> {
        match self {
            ClassCurve::Analytic(c) => optimal_rmax(c.model, c.class, w, &s.optimizer),
            ClassCurve::Simulated(t) => t.grid_argmin(w),
        }
    }
}

/// Builds one curve per mix entry (in mix order). Delay-tolerant classes
/// are simulated on `s.simulation.rmax_grid_m`.
pub fn class_curves<'a>(
    s: &'a Scenario,
    model: &'a crate::analytic::AnalyticModel,
) -> Result<Vec<ClassCurve<'a>>> {
    let grid = &s.simulation.rmax_grid_m;
    s.mix
        .entries()
        .iter()
        .map(|entry| {
            if entry.class.is_delay_tolerant() {
                Ok(ClassCurve::Simulated(tabulate(&simulate(s, entry, grid)?)?))
            } else {
                Ok(ClassCurve::Analytic(AnalyticCurve {
                    model,
                    class: &entry.class,
                }))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeRow {
    pub class_id: String,
    pub phi: f64,
    pub timeout_s: f64,
    pub load_share: f64,
    pub result: OptimizationResult,
}

fn optimize_all(
    s: &Scenario,
    curves: &[ClassCurve<'_>],
    weights: &[f64],
) -> Result<Vec<Vec<OptimizeRow>>> {
    weights
        .iter()
        .map(|&w| {
            s.mix
                .entries()
                .par_iter()
                .zip(curves.par_iter())
                .map(|(entry, curve)| {
                    Ok(OptimizeRow {
                        class_id: entry.id.clone(),
                        phi: entry.class.popularity(),
                        timeout_s: entry.class.timeout_s(),
                        load_share: entry.load_share,
                        result: curve.optimize(w, s)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Per-class optimal range for each weight, sorted by (class id, w).
pub fn cmd_optimize(s: &Scenario, weights: &[f64]) -> Result<Vec<OptimizeRow>> {
    check_weights(weights)?;
    let model = s.analytic_model()?;
    let curves = class_curves(s, &model)?;
    let mut rows: Vec<OptimizeRow> = optimize_all(s, &curves, weights)?.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.class_id
            .cmp(&b.class_id)
            .then(a.result.weight.total_cmp(&b.result.weight))
    });
    Ok(rows)
}

pub const OPTIMIZE_COLUMNS: [&str; 11] = [
    "class_id",
    "phi",
    "timeout_s",
    "w",
    "method",
    "r_hat_m",
    "cost_j",
    "e_d2d_j",
    "e_i2d_j",
    "e_total_j",
    "offload_fraction",
];

pub fn write_optimize(dir: &Path, rows: &[OptimizeRow]) -> Result<PathBuf> {
    let (mut w, path) = csv_writer(dir, "optimize.csv")?;
    w.write_record(OPTIMIZE_COLUMNS)?;
    for r in rows {
        let b = &r.result.breakdown;
        w.write_record([
            r.class_id.clone(),
            d(r.phi),
            d(r.timeout_s),
            d(r.result.weight),
            r.result.method.as_str().to_string(),
            d(r.result.r_hat_m),
            e(r.result.cost_value),
            e(b.e_d2d_j),
            e(b.e_i2d_j),
            e(b.e_total_j),
            d(b.offload_fraction),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

// ---------------------------------------------------------------- compare

/// Common-range benchmark at the D2D budget of the selective strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchedBudget {
    Feasible {
        r_m: f64,
        breakdown: EnergyBreakdown,
        /// `100·(1 − E_I2D(selective) / E_I2D(matched))`.
        i2d_savings_pct: f64,
    },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub w: f64,
    pub selective: EnergyBreakdown,
    pub common: OptimizationResult,
    /// `100·(1 − E_I2D(selective) / E_I2D(common optimum))`.
    pub common_i2d_savings_pct: f64,
    pub matched: MatchedBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// Per-class selective choices, one block per weight.
    pub classes: Vec<(f64, f64, OptimizeRow)>,
}

fn savings_pct(selective: f64, benchmark: f64) -> f64 {
    100.0 * (1.0 - selective / benchmark)
}

/// Selective per-class ranges against a single common range, for each weight.
pub fn cmd_compare(s: &Scenario, weights: &[f64]) -> Result<CompareReport> {
    check_weights(weights)?;
    let grid = &s.simulation.rmax_grid_m;
    let covers = grid.first() == Some(&0.0)
        && grid.last().is_some_and(|&r| r >= s.optimizer.r_grid_max_m);
    if s.mix.entries().iter().any(|e| e.class.is_delay_tolerant()) && !covers {
        return Err(Error::Usage(format!(
            "compare needs a simulation grid spanning [0, {}] m",
            s.optimizer.r_grid_max_m
        )));
    }
    let model = s.analytic_model()?;
    let curves = class_curves(s, &model)?;
    let aggregate = AggregateCurve::new(&s.mix, curves.iter().map(|c| c.as_curve()).collect())?;
    let class_weights: Vec<f64> = aggregate.weights().collect();
    let per_w = optimize_all(s, &curves, weights)?;

    let mut rows = Vec::new();
    let mut classes = Vec::new();
    for (&w, choices) in weights.iter().zip(per_w) {
        let selective =
            aggregate.combine(&choices.iter().map(|c| c.result.breakdown).collect::<Vec<_>>());
        let common = minimize_cost(&aggregate, w, &s.optimizer)?;
        let matched = match rmax_for_d2d_budget(&aggregate, selective.e_d2d_j, &s.optimizer) {
            Ok(r_m) => {
                let breakdown = aggregate.breakdown(r_m)?;
                MatchedBudget::Feasible {
                    r_m,
                    breakdown,
                    i2d_savings_pct: savings_pct(selective.e_i2d_j, breakdown.e_i2d_j),
                }
            }
            Err(Error::BudgetRange { .. }) => MatchedBudget::Infeasible,
            Err(other) => return Err(other),
        };
        rows.push(CompareRow {
            w,
            selective,
            common_i2d_savings_pct: savings_pct(selective.e_i2d_j, common.breakdown.e_i2d_j),
            common,
            matched,
        });
        let mut block: Vec<(f64, f64, OptimizeRow)> = choices
            .into_iter()
            .zip(&class_weights)
            .map(|(c, &cw)| (w, cw, c))
            .collect();
        block.sort_by(|a, b| a.2.class_id.cmp(&b.2.class_id));
        classes.extend(block);
    }
    Ok(CompareReport { rows, classes })
}

pub const COMPARE_COLUMNS: [&str; 15] = [
    "w",
    "selective_e_d2d_j",
    "selective_e_i2d_j",
    "selective_cost_j",
    "common_r_m",
    "common_e_d2d_j",
    "common_e_i2d_j",
    "common_cost_j",
    "common_i2d_savings_pct",
    "matched_feasible",
    "matched_r_m",
    "matched_e_d2d_j",
    "matched_e_i2d_j",
    "matched_cost_j",
    "matched_i2d_savings_pct",
];

pub const COMPARE_CLASS_COLUMNS: [&str; 11] = [
    "w",
    "class_id",
    "phi",
    "timeout_s",
    "load_share",
    "delivery_weight",
    "method",
    "r_hat_m",
    "e_d2d_j",
    "e_i2d_j",
    "cost_j",
];

/// Writes `compare.csv` and `compare_classes.csv`.
pub fn write_compare(dir: &Path, report: &CompareReport) -> Result<Vec<PathBuf>> {
    let (mut w, path) = csv_writer(dir, "compare.csv")?;
    w.write_record(COMPARE_COLUMNS)?;
    for r in &report.rows {
        let c = &r.common.breakdown;
        let mut rec = vec![
            d(r.w),
            e(r.selective.e_d2d_j),
            e(r.selective.e_i2d_j),
            e(r.selective.cost(r.w)),
            d(r.common.r_hat_m),
            e(c.e_d2d_j),
            e(c.e_i2d_j),
            e(r.common.cost_value),
            d(r.common_i2d_savings_pct),
        ];
        match r.matched {
            MatchedBudget::Feasible {
                r_m,
                breakdown,
                i2d_savings_pct,
            } => rec.extend([
                "true".to_string(),
                d(r_m),
                e(breakdown.e_d2d_j),
                e(breakdown.e_i2d_j),
                e(breakdown.cost(r.w)),
                d(i2d_savings_pct),
            ]),
            MatchedBudget::Infeasible => {
                rec.push("false".to_string());
                rec.extend(std::iter::repeat_n(String::new(), 5));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let (mut w, classes_path) = csv_writer(dir, "compare_classes.csv")?;
    w.write_record(COMPARE_CLASS_COLUMNS)?;
    for (wt, cw, row) in &report.classes {
        let b = &row.result.breakdown;
        w.write_record([
            d(*wt),
            row.class_id.clone(),
            d(row.phi),
            d(row.timeout_s),
            d(row.load_share),
            d(*cw),
            row.result.method.as_str().to_string(),
            d(row.result.r_hat_m),
            e(b.e_d2d_j),
            e(b.e_i2d_j),
            e(row.result.cost_value),
        ])?;
    }
    w.flush()?;
    Ok(vec![path, classes_path])
}
