//! Single solves, sweeps, validation suites and bound curves.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use saddlepoint::abr::{abr_solve, AbrConfig};
use saddlepoint::baselines::{certified_stop, eg_reference, eg_solve, gda_solve, BaselineConfig};
use saddlepoint::bounds;
use saddlepoint::problems::{direct_saddle, make_log_perturbed, make_quadratic, separable_instance};
use saddlepoint::prox::{pbr_solve, PbrConfig};
use saddlepoint::rhss::{optimal_k, rhss_solve, RhssConfig, DEFAULT_C1};
use saddlepoint::validation::{self, Suite};
use saddlepoint::{
    CountingOracle, GradientOracle, InstanceSpec, JointPoint, QuadraticSaddle, SmoothnessParams, SolveReport,
    SolverError, Termination,
};

use crate::config::{ExperimentConfig, GridParameter, InstanceConfig, ModeName, ParamsConfig, SolverChoice};
use crate::error::{HarnessError, Result};
use crate::mm;

/// Relative gradient tolerance of the ExtraGradient reference run used as
/// ground truth for non-quadratic instances.
pub const REFERENCE_TOL: f64 = 1e-12;

/// Serializes floats with 17 significant digits.
fn sci<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:.16e}"))
}

fn sci_opt<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => sci(v, s),
        None => s.serialize_str(""),
    }
}

/// One solver run. Column order is the field order and is part of the
/// output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    #[serde(serialize_with = "sci")]
    pub m_x: f64,
    #[serde(serialize_with = "sci")]
    pub m_y: f64,
    #[serde(serialize_with = "sci")]
    pub l_x: f64,
    #[serde(serialize_with = "sci")]
    pub l_xy: f64,
    #[serde(serialize_with = "sci")]
    pub l_y: f64,
    pub solver: String,
    pub mode: String,
    #[serde(serialize_with = "sci")]
    pub epsilon: f64,
    pub gradient_evals: u64,
    pub matvec_products: u64,
    pub outer_iterations: u64,
    /// `‖z_T − z*‖/‖z_0 − z*‖`, or the plain distance when `z_0 = z*`.
    /// NaN for failed cells.
    #[serde(serialize_with = "sci")]
    pub final_relative_error: f64,
    /// Seconds. Not reproducible.
    #[serde(serialize_with = "sci")]
    pub wall_time: f64,
    /// `tolerance_met`, `iteration_cap`, `precondition_violated`, or
    /// `error:<category>` when the run failed.
    pub termination: String,
}

impl SweepRow {
    /// The row with its timing field cleared, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self { wall_time: 0.0, ..self.clone() }
    }
}

pub const ROW_COLUMNS: [&str; 17] = [
    "seed",
    "n",
    "m",
    "m_x",
    "m_y",
    "l_x",
    "l_xy",
    "l_y",
    "solver",
    "mode",
    "epsilon",
    "gradient_evals",
    "matvec_products",
    "outer_iterations",
    "final_relative_error",
    "wall_time",
    "termination",
];

fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::ToleranceMet => "tolerance_met",
        Termination::IterationCap => "iteration_cap",
        Termination::Stalled => "stalled",
        Termination::PreconditionViolated => "precondition_violated",
    }
}

fn error_label(e: &HarnessError) -> String {
    let cat = match e {
        HarnessError::Solver(s) => match s {
            SolverError::DimensionMismatch { .. } => "dimension_mismatch",
            SolverError::InvalidParams(_) => "invalid_params",
            SolverError::InvalidConfig(_) => "invalid_config",
            SolverError::PreconditionViolated(_) => "precondition_violated",
            SolverError::InnerIterationCap(_) => "inner_iteration_cap",
            SolverError::Diverged { .. } => "diverged",
            SolverError::Breakdown => "breakdown",
            SolverError::Singular => "singular",
            SolverError::NonFinite => "non_finite",
        },
        HarnessError::Config { .. } | HarnessError::Json { .. } => "config",
        HarnessError::MatrixMarket { .. } => "matrix_market",
        _ => "other",
    };
    format!("error:{cat}")
}

enum Built {
    Quadratic(QuadraticSaddle),
    LogPerturbed(saddlepoint::problems::LogPerturbed),
}

struct Instance {
    built: Built,
    params: SmoothnessParams,
}

fn build_instance(inst: &InstanceConfig, seed: u64) -> Result<Instance> {
    Ok(match inst {
        InstanceConfig::Quadratic { n, m, params, shape } => {
            let p = params.to_params("instance.params")?;
            let spec = InstanceSpec::new(*n, *m, p, seed).with_shape((*shape).into());
            Instance { built: Built::Quadratic(make_quadratic(&spec)?), params: p }
        }
        InstanceConfig::LogPerturbed { n, m, params, rho, shape } => {
            let p = params.to_params("instance.params")?;
            let spec = InstanceSpec::new(*n, *m, p, seed).with_shape((*shape).into());
            let (f, declared) = make_log_perturbed(&spec, *rho)?;
            Instance { built: Built::LogPerturbed(f), params: declared }
        }
        InstanceConfig::Separable { a, c } => {
            let q = separable_instance(a, c, seed)?;
            let params = q.measured_params()?;
            Instance { built: Built::Quadratic(q), params }
        }
        InstanceConfig::MatrixMarket { sidecar } => {
            let loaded = mm::read_instance(sidecar)?;
            Instance { built: Built::Quadratic(loaded.quadratic), params: loaded.params }
        }
    })
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub row: SweepRow,
    pub report: SolveReport,
    pub z_star: JointPoint,
    pub z0: JointPoint,
}

fn relative_error(z: &JointPoint, z_star: &JointPoint, z0: &JointPoint) -> f64 {
    let d0 = z0.distance(z_star);
    let d = z.distance(z_star);
    if d0 > 0.0 {
        d / d0
    } else {
        d
    }
}

fn run_oracle_solver<O: GradientOracle>(
    oracle: &O,
    z0: &JointPoint,
    params: &SmoothnessParams,
    solver: SolverChoice,
    mode: ModeName,
    epsilon: f64,
) -> Result<SolveReport> {
    let report = match solver {
        SolverChoice::Abr => {
            if !params.weakly_coupled() {
                return Err(SolverError::PreconditionViolated("ABR needs L_xy <= sqrt(m_x m_y)/2").into());
            }
            // The summed-norm target at ε/√2 implies the Euclidean one at ε.
            abr_solve(oracle, z0, &AbrConfig::new(epsilon / std::f64::consts::SQRT_2, *params))?
        }
        SolverChoice::Pbr => pbr_solve(oracle, z0, params, &PbrConfig::new(epsilon, mode.into()))?,
        SolverChoice::Extragradient => {
            let stop = certified_stop(oracle, z0, params, epsilon);
            eg_solve(oracle, z0, &BaselineConfig::extragradient(params, stop))?
        }
        SolverChoice::Gda => {
            let stop = certified_stop(oracle, z0, params, epsilon);
            gda_solve(oracle, z0, &BaselineConfig::gda(params, stop))?
        }
        SolverChoice::Rhss { .. } => unreachable!("handled by the caller"),
    };
    Ok(report)
}

/// Runs one solver on the instance built from `inst` and `seed`, starting
/// at the origin, and checks the result against the ground truth.
pub fn run_cell(
    inst: &InstanceConfig,
    seed: u64,
    solver: SolverChoice,
    mode: ModeName,
    epsilon: f64,
) -> Result<SolveOutcome> {
    let instance = build_instance(inst, seed)?;
    let params = instance.params;
    let started = Instant::now();
    let (report, z_star, evals, matvecs, z0) = match &instance.built {
        Built::Quadratic(q) => {
            let z0 = JointPoint::zeros(q.n(), q.m());
            let z_star = direct_saddle(q)?;
            let (report, evals, matvecs) = if let SolverChoice::Rhss { k } = solver {
                let r = rhss_solve(q, &params, &z0, &RhssConfig::new(k, epsilon, mode.into()))?;
                let (e, mv) = (r.gradient_evals, r.matvec_products);
                (r, e, mv)
            } else {
                let oracle = CountingOracle::new(q);
                let r = run_oracle_solver(&oracle, &z0, &params, solver, mode, epsilon)?;
                (r, oracle.evaluations(), oracle.matvec_products())
            };
            (report, z_star, evals, matvecs, z0)
        }
        Built::LogPerturbed(f) => {
            let (n, m) = (f.quad.n(), f.quad.m());
            let z0 = JointPoint::zeros(n, m);
            let z_star = eg_reference(&CountingOracle::new(f), &z0, &params, REFERENCE_TOL)?;
            if matches!(solver, SolverChoice::Rhss { .. }) {
                return Err(HarnessError::config("solvers", "rhss needs a quadratic instance"));
            }
            let oracle = CountingOracle::new(f);
            let r = run_oracle_solver(&oracle, &z0, &params, solver, mode, epsilon)?;
            (r, z_star, oracle.evaluations(), oracle.matvec_products(), z0)
        }
    };
    let wall_time = started.elapsed().as_secs_f64();
    let (n, m) = z0.dims();
    let row = SweepRow {
        seed,
        n,
        m,
        m_x: params.m_x(),
        m_y: params.m_y(),
        l_x: params.l_x(),
        l_xy: params.l_xy(),
        l_y: params.l_y(),
        solver: solver.label(),
        mode: mode.as_str().into(),
        epsilon,
        gradient_evals: evals,
        matvec_products: matvecs,
        outer_iterations: report.outer_iterations,
        final_relative_error: relative_error(&report.final_point, &z_star, &z0),
        wall_time,
        termination: termination_label(report.termination).into(),
    };
    Ok(SolveOutcome { row, report, z_star, z0 })
}

fn failed_row(inst: &InstanceConfig, seed: u64, solver: SolverChoice, mode: ModeName, eps: f64, e: &HarnessError) -> SweepRow {
    let p = inst.params().unwrap_or(ParamsConfig { m_x: f64::NAN, m_y: f64::NAN, l_x: f64::NAN, l_xy: f64::NAN, l_y: f64::NAN });
    let (n, m) = match inst {
        InstanceConfig::Quadratic { n, m, .. } | InstanceConfig::LogPerturbed { n, m, .. } => (*n, *m),
        InstanceConfig::Separable { a, c } => (a.len(), c.len()),
        InstanceConfig::MatrixMarket { .. } => (0, 0),
    };
    SweepRow {
        seed,
        n,
        m,
        m_x: p.m_x,
        m_y: p.m_y,
        l_x: p.l_x,
        l_xy: p.l_xy,
        l_y: p.l_y,
        solver: solver.label(),
        mode: mode.as_str().into(),
        epsilon: eps,
        gradient_evals: 0,
        matvec_products: 0,
        outer_iterations: 0,
        final_relative_error: f64::NAN,
        wall_time: 0.0,
        termination: error_label(e),
    }
}

/// Final point of a single solve, for offline checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDump {
    pub seed: u64,
    pub solver: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Runs every seed and solver of a config without a grid, in order. The
/// first failing run aborts with its error.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<Vec<SolveOutcome>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        for &solver in &cfg.solvers {
            out.push(run_cell(&cfg.instance, seed, solver, cfg.mode, cfg.epsilon)?);
        }
    }
    Ok(out)
}

/// Writes `rows.csv` and `points.json` for a single solve.
pub fn write_solve(dir: &Path, outcomes: &[SolveOutcome]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let rows: Vec<SweepRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    write_rows(&dir.join("rows.csv"), &rows)?;
    let points: Vec<PointDump> = outcomes
        .iter()
        .map(|o| PointDump {
            seed: o.row.seed,
            solver: o.row.solver.clone(),
            x: o.report.final_point.x.as_slice().to_vec(),
            y: o.report.final_point.y.as_slice().to_vec(),
        })
        .collect();
    write_json(&dir.join("points.json"), &points)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(ROW_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    std::fs::write(path, rows_to_csv(rows)?).map_err(|e| HarnessError::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Median over seeds of one (grid value, solver) cell. Failed runs are
/// excluded from the medians and counted in `failures`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub grid_parameter: String,
    #[serde(serialize_with = "sci_opt")]
    pub grid_value: Option<f64>,
    pub solver: String,
    pub runs: usize,
    pub failures: usize,
    pub tolerance_met: usize,
    #[serde(serialize_with = "sci")]
    pub median_gradient_evals: f64,
    #[serde(serialize_with = "sci")]
    pub median_matvec_products: f64,
    #[serde(serialize_with = "sci")]
    pub median_final_relative_error: f64,
}

/// One point of a bound curve. `k` is the recursion depth of the `rhss`
/// curves (chosen by `optimal_k` at each point) and 0 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub grid_parameter: String,
    #[serde(serialize_with = "sci")]
    pub grid_value: f64,
    pub label: String,
    pub k: u32,
    #[serde(serialize_with = "sci")]
    pub value: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let h = values.len() / 2;
    if values.len() % 2 == 1 {
        values[h]
    } else {
        0.5 * (values[h - 1] + values[h])
    }
}

/// Rows, per-cell medians and bound curves of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
    pub bounds: Vec<BoundRow>,
}

fn grid_points(cfg: &ExperimentConfig) -> Vec<Option<f64>> {
    match &cfg.grid {
        Some(g) => g.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    }
}

/// Runs every (grid value × seed × solver) cell. Cells run in parallel;
/// rows come back in that nested order regardless of scheduling. A
/// failing cell becomes a row with an `error:` termination.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let points = grid_points(cfg);
    let mut cells = Vec::new();
    for &value in &points {
        let inst = cfg.instance_at(value);
        for &seed in &cfg.seeds {
            for &solver in &cfg.solvers {
                cells.push((inst.clone(), seed, solver));
            }
        }
    }
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|(inst, seed, solver)| match run_cell(inst, *seed, *solver, cfg.mode, cfg.epsilon) {
            Ok(o) => o.row,
            Err(e) => failed_row(inst, *seed, *solver, cfg.mode, cfg.epsilon, &e),
        })
        .collect();

    let grid_name = cfg.grid.as_ref().map_or("none", |g| g.parameter.as_str()).to_string();
    let per_point = cfg.seeds.len() * cfg.solvers.len();
    let mut summary = Vec::new();
    for (pi, &value) in points.iter().enumerate() {
        let block = &rows[pi * per_point..(pi + 1) * per_point];
        for solver in &cfg.solvers {
            let label = solver.label();
            let mine: Vec<&SweepRow> = block.iter().filter(|r| r.solver == label).collect();
            let ok: Vec<&&SweepRow> = mine.iter().filter(|r| !r.termination.starts_with("error:")).collect();
            let mut evals: Vec<f64> = ok.iter().map(|r| r.gradient_evals as f64).collect();
            let mut mv: Vec<f64> = ok.iter().map(|r| r.matvec_products as f64).collect();
            let mut err: Vec<f64> = ok.iter().map(|r| r.final_relative_error).collect();
            summary.push(SummaryRow {
                grid_parameter: grid_name.clone(),
                grid_value: value,
                solver: label,
                runs: mine.len(),
                failures: mine.len() - ok.len(),
                tolerance_met: ok.iter().filter(|r| r.termination == "tolerance_met").count(),
                median_gradient_evals: median(&mut evals),
                median_matvec_products: median(&mut mv),
                median_final_relative_error: median(&mut err),
            });
        }
    }

    let bounds = match (&cfg.grid, cfg.instance.params()) {
        (Some(g), Some(base)) => bound_rows(&base, g.parameter, &g.values, cfg.epsilon)?,
        _ => Vec::new(),
    };
    Ok(SweepResult { rows, summary, bounds })
}

/// Leading-term curves (`lower`, `rhss`, `pbr`, `linetal`) and their
/// polylog variants (`*_logs`) at each grid value.
pub fn bound_rows(base: &ParamsConfig, parameter: GridParameter, values: &[f64], epsilon: f64) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let mut pc = *base;
        parameter.apply(&mut pc, v);
        let p = pc.to_params(&format!("grid.values[{i}]"))?;
        let k = optimal_k(&p, DEFAULT_C1);
        let curves: [(&str, u32, f64); 8] = [
            ("lower", 0, bounds::lower_bound(&p, epsilon)),
            ("rhss", k, bounds::rhss_bound_leading(&p, k, epsilon)),
            ("pbr", 0, bounds::pbr_bound(&p, epsilon)),
            ("linetal", 0, bounds::linetal_bound(&p, epsilon)),
            ("lower_logs", 0, bounds::lower_bound(&p, epsilon)),
            ("rhss_logs", k, bounds::rhss_bound(&p, k, epsilon)),
            ("pbr_logs", 0, bounds::pbr_bound_with_logs(&p, epsilon)),
            ("linetal_logs", 0, bounds::linetal_bound(&p, epsilon)),
        ];
        for (label, k, value) in curves {
            rows.push(BoundRow {
                grid_parameter: parameter.as_str().into(),
                grid_value: v,
                label: label.into(),
                k,
                value,
            });
        }
    }
    Ok(rows)
}

fn write_csv<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for it in items {
        w.serialize(it)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `rows.csv`, `summary.csv` and, with a grid, `bounds.csv`.
pub fn write_sweep(dir: &Path, result: &SweepResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_rows(&dir.join("rows.csv"), &result.rows)?;
    write_csv(&dir.join("summary.csv"), &result.summary)?;
    if !result.bounds.is_empty() {
        write_csv(&dir.join("bounds.csv"), &result.bounds)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub samples: u64,
    pub failures: u64,
    pub worst_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
}

/// Suite names accepted by [`validate`], plus `all`.
pub fn suite_names() -> Vec<&'static str> {
    Suite::ALL.iter().map(|s| s.name()).collect()
}

/// Runs one named suite, or every suite for `all`.
pub fn validate(name: &str, seed: u64) -> Result<Vec<ValidationRecord>> {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![Suite::from_name(name).map_err(|_| {
            HarnessError::config("suite", format!("unknown suite `{name}`; expected one of {} or all", suite_names().join(", ")))
        })?]
    };
    suites
        .into_iter()
        .map(|s| {
            let r = validation::run_suite(s, seed)?;
            Ok(ValidationRecord {
                suite: r.suite.clone(),
                seed,
                passed: r.passed(),
                checks: r
                    .checks
                    .iter()
                    .map(|c| CheckRecord {
                        name: c.name.clone(),
                        samples: c.samples,
                        failures: c.failures,
                        worst_ratio: c.worst_ratio,
                        passed: c.passed(),
                    })
                    .collect(),
            })
        })
        .collect()
}

/// Applies the universal command-line overrides to a config.
pub fn apply_overrides(cfg: &mut ExperimentConfig, seed: Option<u64>, mode: Option<ModeName>, out: Option<PathBuf>) {
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(o) = out {
        cfg.output.dir = Some(o);
    }
}
