//! Acceptance criteria, one line each. Runs as a plain binary so the lines
//! show up without `--nocapture`; exits nonzero when any criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,8` runs a subset.

use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use saddlepoint::abr::abr_gradient_budget;
use saddlepoint::prox::{theorem2_iteration_bound, PbrConstants};
use saddlepoint::validation::{self, describe, CheckResult, ErrorNorm};
use saddlepoint::SmoothnessParams;
use saddlepoint_harness::config::{
    ExperimentConfig, Grid, GridParameter, InstanceConfig, ModeName, OutputConfig, ParamsConfig, ShapeName,
    SolverChoice,
};
use saddlepoint_harness::run::{self, SweepRow};

const SEED: u64 = 2024;

struct Verdict {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn from_checks(checks: &[CheckResult]) -> Self {
        let passed = checks.iter().all(CheckResult::passed);
        let failing: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
        let summary = if passed {
            format!("{} checks, {} samples", checks.len(), checks.iter().map(|c| c.samples).sum::<u64>())
        } else {
            format!("failing: {}", failing.join("; "))
        };
        Verdict { passed, summary, details: checks.iter().map(describe).collect() }
    }
}

fn params(m_x: f64, m_y: f64, l_x: f64, l_xy: f64, l_y: f64) -> ParamsConfig {
    ParamsConfig { m_x, m_y, l_x, l_xy, l_y }
}

/// 50 instances over every `(n, m)` pair from {8, 32, 64}. Condition
/// numbers reach 1e4 at size 8, 1e3 at 32 and 1e2 at 64; couplings run
/// from 0 through the weakly coupled range up to `L_x`.
fn ground_truth_cases() -> Vec<(usize, usize, ParamsConfig, u64)> {
    let sizes = [8usize, 32, 64];
    let moduli = [(1.0, 1.0), (1.0, 0.5), (2.0, 1.0), (0.5, 2.0)];
    (0..50)
        .map(|i| {
            let n = sizes[i % 3];
            let m = sizes[(i / 3) % 3];
            let kmax = match n.max(m) {
                8 => 1e4,
                32 => 1e3,
                _ => 1e2,
            };
            let kappas: Vec<f64> = [10.0, 1e2, 1e3, 1e4].into_iter().filter(|&k| k <= kmax).collect();
            let kx = kappas[(i / 9) % kappas.len()];
            let ky = kappas[(i / 9 + i) % kappas.len()];
            let (m_x, m_y) = moduli[i % 4];
            let (l_x, l_y) = (kx * m_x, ky * m_y);
            let weak = 0.5 * f64::sqrt(m_x * m_y);
            let l_xy = match i % 6 {
                0 => 0.0,
                1 => 0.8 * weak,
                2 => 2.0 * m_x.max(m_y),
                3 => f64::sqrt(l_x * m_y),
                4 => 0.5 * l_x,
                _ => l_x,
            };
            (n, m, params(m_x, m_y, l_x, l_xy, l_y), 100 + i as u64)
        })
        .collect()
}

fn applicable_solvers(p: &SmoothnessParams) -> Vec<SolverChoice> {
    let mut s = Vec::new();
    if p.weakly_coupled() {
        s.push(SolverChoice::Abr);
    }
    s.push(SolverChoice::Pbr);
    if p.m_y() < p.l_xy() {
        s.extend([1, 2].map(|k| SolverChoice::Rhss { k }));
        // Deep recursion at strong coupling costs minutes per run on one core.
        if p.l_xy() <= 100.0 * p.min_m() {
            s.push(SolverChoice::Rhss { k: 3 });
        }
    }
    s.push(SolverChoice::Extragradient);
    if p.l() / p.min_m() <= 100.0 {
        s.push(SolverChoice::Gda);
    }
    s
}

fn criterion_1() -> Verdict {
    let eps = 1e-6;
    let mut cells = Vec::new();
    for (n, m, pc, seed) in ground_truth_cases() {
        let p = pc.to_params("case").expect("valid case");
        let inst = InstanceConfig::Quadratic { n, m, params: pc, shape: ShapeName::Endpoints };
        for solver in applicable_solvers(&p) {
            cells.push((inst.clone(), seed, solver));
        }
    }
    let rows: Vec<(String, Result<SweepRow, String>)> = cells
        .par_iter()
        .map(|(inst, seed, solver)| {
            let label = format!("{solver:?} seed {seed}");
            (label, run::run_cell(inst, *seed, *solver, ModeName::Practical, eps).map(|o| o.row).map_err(|e| e.to_string()))
        })
        .collect();
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (label, r) in &rows {
        match r {
            Ok(row) if row.termination == "tolerance_met" && row.final_relative_error <= eps => {
                worst = worst.max(row.final_relative_error)
            }
            Ok(row) => bad.push(format!("{label}: {} error {:.3e}", row.termination, row.final_relative_error)),
            Err(e) => bad.push(format!("{label}: {e}")),
        }
    }
    let by_solver = |name: &str| rows.iter().filter(|(l, _)| l.starts_with(name)).count();
    Verdict {
        passed: bad.is_empty(),
        summary: format!(
            "{} runs on 50 instances (abr {}, pbr {}, rhss {}, eg {}, gda {}), worst relative error {worst:.3e}, {} failures",
            rows.len(),
            by_solver("Abr"),
            by_solver("Pbr"),
            by_solver("Rhss"),
            by_solver("Extragradient"),
            by_solver("Gda"),
            bad.len()
        ),
        details: bad,
    }
}

fn criterion_2() -> Verdict {
    Verdict::from_checks(&validation::abr_suite(SEED, 20).expect("abr suite runs"))
}

fn criterion_3() -> Verdict {
    Verdict::from_checks(&validation::agd_suite(SEED).expect("agd suite runs"))
}

fn criterion_4() -> Verdict {
    Verdict::from_checks(&validation::facts_suite(SEED, 20, 1000).expect("facts suite runs"))
}

fn criterion_5() -> Verdict {
    let stated = validation::hss_spectral_checks(SEED, 20, ErrorNorm::Euclidean).expect("spectral checks run");
    let mut v = Verdict::from_checks(&stated);
    // The same instances in the norm the splitting contracts in; reported
    // for diagnosis, not part of the verdict.
    let splitting = validation::hss_spectral_checks(SEED, 20, ErrorNorm::Splitting).expect("spectral checks run");
    v.details.extend(splitting.iter().take(2).chain(splitting.last()).map(|c| format!("(splitting norm) {}", describe(c))));
    v
}

fn criterion_6() -> Verdict {
    let [euclidean, splitting, certificate] =
        validation::rhss_contraction_checks(SEED, 6).expect("contraction checks run");
    let mut v = Verdict::from_checks(&[euclidean, certificate]);
    // Same trajectories in the norm the splitting contracts in; for
    // diagnosis only.
    v.details.push(format!("(splitting norm) {}", describe(&splitting)));
    v
}

fn criterion_7() -> Verdict {
    Verdict::from_checks(&validation::cg_suite(SEED).expect("cg suite runs"))
}

fn lxy_grid() -> Vec<f64> {
    [1.0, 1.5, 2.0, 2.5, 3.0, 3.5].iter().map(|e| 10f64.powf(*e)).collect()
}

fn scaling_config() -> ExperimentConfig {
    ExperimentConfig {
        instance: InstanceConfig::Quadratic {
            n: 8,
            m: 8,
            params: params(1.0, 1.0, 1e4, 10.0, 1e4),
            shape: ShapeName::Endpoints,
        },
        solvers: vec![SolverChoice::Pbr],
        mode: ModeName::Practical,
        epsilon: 1e-6,
        seeds: vec![0, 1, 2, 3, 4],
        grid: Some(Grid { parameter: GridParameter::LXy, values: lxy_grid() }),
        output: OutputConfig::default(),
    }
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

fn criterion_8() -> Verdict {
    let res = run::run_sweep(&scaling_config()).expect("sweep runs");
    let grid = lxy_grid();
    let medians: Vec<f64> = res.summary.iter().map(|s| s.median_gradient_evals).collect();
    let all_met = res.rows.iter().all(|r| r.termination == "tolerance_met" && r.final_relative_error <= 1e-6);
    let slope = log_log_slope(&grid[1..5], &medians[1..5]);
    let ratio = medians[5] / medians[0];
    let slope_ok = (0.35..=0.65).contains(&slope);
    let ratio_ok = ratio >= 3.0;
    Verdict {
        passed: all_met && slope_ok && ratio_ok,
        summary: format!(
            "interior slope {slope:.3} (want [0.35, 0.65]), median(10^3.5)/median(10) = {ratio:.3} (want >= 3), all runs converged: {all_met}"
        ),
        details: grid
            .iter()
            .zip(&medians)
            .map(|(g, m)| format!("L_xy {g:.4e}: median gradient evals {m:.4e}"))
            .chain(std::iter::once(scaling_formula_diagnostic(&grid)))
            .collect(),
    }
}

/// Diagnostic only: the same slope and ratio computed from the layered
/// iteration-count formulas (outer x middle x ABR budget) at the practical
/// inner tolerances. It does not enter the verdict.
fn scaling_formula_diagnostic(grid: &[f64]) -> String {
    let counts: Vec<f64> = grid
        .iter()
        .map(|&g| {
            let p = SmoothnessParams::new(1.0, 1.0, 1e4, g, 1e4).unwrap();
            let k = PbrConstants::from_params(&p);
            let outer = theorem2_iteration_bound(&p, k.beta1, 1e-6 / std::f64::consts::SQRT_2) as f64;
            let mid = theorem2_iteration_bound(&k.middle_params(&p).unwrap(), k.beta2, 1e-2) as f64;
            let abr = abr_gradient_budget(&k.abr_params(&p).unwrap(), 1e-2).unwrap() as f64;
            outer * mid * abr
        })
        .collect();
    format!(
        "diagnostic: iteration-count formula gives interior slope {:.3}, ratio {:.2}",
        log_log_slope(&grid[1..5], &counts[1..5]),
        counts[5] / counts[0]
    )
}

fn criterion_9() -> Verdict {
    let base = params(1.0, 1.0, 1e4, 10.0, 1e4);
    let rows = run::bound_rows(&base, GridParameter::LXy, &lxy_grid(), 1e-6).expect("bounds evaluate");
    let mut bad = Vec::new();
    let mut details = Vec::new();
    for g in lxy_grid() {
        let at = |label: &str| {
            rows.iter().find(|r| r.grid_value == g && r.label == label).expect("curve present")
        };
        let (lo, rh, pb, li) = (at("lower"), at("rhss"), at("pbr"), at("linetal"));
        let ok = lo.value <= rh.value && rh.value <= pb.value && pb.value <= li.value;
        details.push(format!(
            "L_xy {g:.4e}: lower {:.4e} <= rhss(k={}) {:.4e} <= pbr {:.4e} <= linetal {:.4e}: {ok}",
            lo.value, rh.k, rh.value, pb.value, li.value
        ));
        if !ok {
            bad.push(g);
        }
    }
    Verdict {
        passed: bad.is_empty(),
        summary: format!("ordering holds at {}/{} grid points", lxy_grid().len() - bad.len(), lxy_grid().len()),
        details,
    }
}

fn criterion_10() -> Verdict {
    let mut problems = Vec::new();
    let dir = tempfile::tempdir().expect("tempdir");

    // Single solves through the binary, twice.
    let solve_cfg = ExperimentConfig::from_json(
        r#"{ "instance": { "kind": "quadratic", "n": 6, "m": 5,
               "params": { "m_x": 1, "m_y": 2, "l_x": 50, "l_xy": 10, "l_y": 40 } },
             "solvers": [{ "solver": "pbr" }, { "solver": "rhss", "k": 2 }, { "solver": "extragradient" }],
             "seeds": [1, 2] }"#,
        "determinism",
    )
    .expect("config parses");
    let cfg_path = dir.path().join("solve.json");
    std::fs::write(&cfg_path, solve_cfg.to_json()).expect("write config");
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let out = dir.path().join(format!("solve{run_id}"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_saddlepoint"))
            .arg("solve")
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .status()
            .expect("binary runs");
        if !status.success() {
            problems.push(format!("solve run {run_id} exited with {status}"));
            return Verdict { passed: false, summary: problems.join("; "), details: vec![] };
        }
        let rows: Vec<SweepRow> = run::read_rows(&out.join("rows.csv")).expect("rows parse");
        let points = std::fs::read(out.join("points.json")).expect("points written");
        outputs.push((rows.iter().map(SweepRow::without_timing).collect::<Vec<_>>(), points));
    }
    if outputs[0].0 != outputs[1].0 {
        problems.push("solve rows differ".into());
    }
    if outputs[0].1 != outputs[1].1 {
        problems.push("solve final points differ".into());
    }

    // Sweeps through the library, twice, written to disk.
    let mut sweep_cfg = solve_cfg.clone();
    sweep_cfg.grid = Some(Grid { parameter: GridParameter::LXy, values: vec![0.5, 10.0, 40.0] });
    let mut sweeps = Vec::new();
    for run_id in 0..2 {
        let out = dir.path().join(format!("sweep{run_id}"));
        let res = run::run_sweep(&sweep_cfg).expect("sweep runs");
        run::write_sweep(&out, &res).expect("sweep written");
        let rows: Vec<SweepRow> = run::read_rows(&out.join("rows.csv")).expect("rows parse");
        sweeps.push((
            rows.iter().map(SweepRow::without_timing).collect::<Vec<_>>(),
            std::fs::read(out.join("summary.csv")).expect("summary"),
            std::fs::read(out.join("bounds.csv")).expect("bounds"),
        ));
    }
    if sweeps[0].0 != sweeps[1].0 {
        problems.push("sweep rows differ".into());
    }
    if sweeps[0].1 != sweeps[1].1 {
        problems.push("sweep summaries differ".into());
    }
    if sweeps[0].2 != sweeps[1].2 {
        problems.push("sweep bound curves differ".into());
    }
    Verdict {
        passed: problems.is_empty(),
        summary: if problems.is_empty() {
            format!(
                "2 solve reruns ({} rows) and 2 sweep reruns ({} rows) identical outside wall_time",
                outputs[0].0.len(),
                sweeps[0].0.len()
            )
        } else {
            problems.join("; ")
        },
        details: vec![],
    }
}

type Criterion = (usize, &'static str, fn() -> Verdict);

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; a name
    // filter that matches nothing here skips the whole target.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance criterion".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());

    let criteria: [Criterion; 10] = [
        (1, "ground-truth agreement", criterion_1),
        (2, "ABR conformance", criterion_2),
        (3, "AGD conformance", criterion_3),
        (4, "fact suite", criterion_4),
        (5, "HSS spectral suite", criterion_5),
        (6, "RHSS contraction and certificate", criterion_6),
        (7, "CG bound", criterion_7),
        (8, "PBR scaling law", criterion_8),
        (9, "bound ordering", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        for d in &v.details {
            println!("    {d}");
        }
        println!(
            "criterion {id} ({name}): {} [{secs:.1}s] {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.summary
        );
        if !v.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
