//! Alternating Best Response for weakly coupled problems
//! (`L_xy <= sqrt(m_x m_y)/2`).
//!
//! Each round approximately solves `min_x f(x, y_t)` and then
//! `max_y f(x_{t+1}, y)` with a fixed number of AGD steps, warm-started at
//! the current blocks.

use alloc::vec::Vec;

use num_traits::Float;

use crate::agd::{abr_inner_steps, agd_in_place, AgdConfig, AgdWorkspace};
use crate::base::{
    GradientOracle, JointPoint, Result, SmoothnessParams, SolveReport, SolverError, Termination,
};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrConfig {
    /// Target ratio of summed errors `‖x−x*‖ + ‖y−y*‖`.
    pub epsilon: f64,
    pub params: SmoothnessParams,
    /// Maximum number of rounds.
    pub iteration_cap: u64,
    /// Keep the iterate after every round in the report.
    pub record_trace: bool,
}

impl AbrConfig {
    pub fn new(epsilon: f64, params: SmoothnessParams) -> Self {
        Self { epsilon, params, iteration_cap: 100_000, record_trace: false }
    }

    pub fn rounds(&self) -> u64 {
        abr_rounds(&self.params, self.epsilon)
    }
}

/// `⌈log₂(4√(κ_x + κ_y)/ε)⌉` rounds, or zero when `ε >= 1`.
pub fn abr_rounds(params: &SmoothnessParams, epsilon: f64) -> u64 {
    if epsilon >= 1.0 {
        return 0;
    }
    let arg = 4.0 * Float::sqrt(params.kappa_x() + params.kappa_y()) / epsilon;
    Float::ceil(Float::log2(arg)).max(0.0) as u64
}

/// Gradient evaluations of one full run: rounds times both inner budgets.
pub fn abr_gradient_budget(params: &SmoothnessParams, epsilon: f64) -> Result<u64> {
    let sx = abr_inner_steps(params.kappa_x())?;
    let sy = abr_inner_steps(params.kappa_y())?;
    Ok(abr_rounds(params, epsilon) * (sx + sy))
}

/// Reusable AGD buffers for both blocks.
#[derive(Debug, Clone, Default)]
pub struct AbrWorkspace {
    x: AgdWorkspace,
    y: AgdWorkspace,
}

/// Runs `rounds` rounds in place. `on_round` sees the blocks after each
/// round.
pub(crate) fn abr_rounds_in_place<O, F>(
    oracle: &O,
    x: &mut [f64],
    y: &mut [f64],
    params: &SmoothnessParams,
    rounds: u64,
    ws: &mut AbrWorkspace,
    mut on_round: F,
) -> Result<()>
where
    O: GradientOracle + ?Sized,
    F: FnMut(&[f64], &[f64]),
{
    let cfg_x = AgdConfig::new(params.l_x(), params.m_x(), abr_inner_steps(params.kappa_x())?)?;
    let cfg_y = AgdConfig::new(params.l_y(), params.m_y(), abr_inner_steps(params.kappa_y())?)?;
    for _ in 0..rounds {
        {
            let y_t: &[f64] = y;
            agd_in_place(|xx, g| oracle.eval_x_into(xx, y_t, g), x, &cfg_x, &mut ws.x);
        }
        {
            let x_next: &[f64] = x;
            agd_in_place(
                |yy, g| {
                    oracle.eval_y_into(x_next, yy, g);
                    linalg::negate(g);
                },
                y,
                &cfg_y,
                &mut ws.y,
            );
        }
        on_round(x, y);
    }
    Ok(())
}

/// Alternating Best Response from `z0`.
///
/// Runs exactly `cfg.rounds()` rounds (capped by `cfg.iteration_cap`), so
/// the evaluation count is deterministic. The residual history is recorded
/// with uncounted evaluations.
pub fn abr_solve<O: GradientOracle + ?Sized>(
    oracle: &O,
    z0: &JointPoint,
    cfg: &AbrConfig,
) -> Result<SolveReport> {
    let (n, m) = oracle.dims();
    if z0.dims() != (n, m) {
        return Err(SolverError::DimensionMismatch { expected: n, got: z0.x.len() });
    }
    if !(cfg.epsilon > 0.0) {
        return Err(SolverError::InvalidConfig("epsilon must be positive"));
    }
    if cfg.iteration_cap == 0 {
        return Err(SolverError::InvalidConfig("iteration cap must be at least 1"));
    }
    if !cfg.params.weakly_coupled() {
        return Err(SolverError::PreconditionViolated("ABR needs L_xy <= sqrt(m_x m_y)/2"));
    }
    let target = cfg.rounds();
    let rounds = target.min(cfg.iteration_cap);
    let evals0 = oracle.evaluations();
    let mv0 = oracle.matvec_products();

    let mut x = z0.x.clone();
    let mut y = z0.y.clone();
    let mut history = Vec::with_capacity(rounds as usize + 1);
    let mut trace = Vec::new();
    history.push((0, oracle.peek_norm(z0)));
    if cfg.record_trace {
        trace.push(z0.clone());
    }
    let mut ws = AbrWorkspace::default();
    abr_rounds_in_place(
        oracle,
        x.as_mut_slice(),
        y.as_mut_slice(),
        &cfg.params,
        rounds,
        &mut ws,
        |xs, ys| {
            let z = JointPoint::from_slices(xs, ys).unwrap_or_else(|_| JointPoint::zeros(n, m));
            history.push((oracle.evaluations() - evals0, oracle.peek_norm(&z)));
            if cfg.record_trace {
                trace.push(z);
            }
        },
    )?;
    let final_point = JointPoint { x, y };
    if !final_point.is_finite() {
        return Err(SolverError::NonFinite);
    }
    Ok(SolveReport {
        outer_iterations: rounds,
        gradient_evals: oracle.evaluations() - evals0,
        matvec_products: oracle.matvec_products() - mv0,
        final_point,
        residual_history: history,
        termination: if rounds < target { Termination::IterationCap } else { Termination::ToleranceMet },
        trace,
    })
}

/// Per-round ratios of `‖x_t − x*‖ + C‖y_t − y*‖` with
/// `C = 4√(m_y/m_x)`. Rounds that start within `1e-10·max(1, ‖x*‖ + C‖y*‖)`
/// of `z_star`, the rounding level of a direct solve, report 0.
pub fn abr_round_contraction(
    trace: &[JointPoint],
    z_star: &JointPoint,
    params: &SmoothnessParams,
) -> Vec<f64> {
    let c = 4.0 * Float::sqrt(params.m_y() / params.m_x());
    let weighted = |z: &JointPoint| {
        linalg::dist(z.x.as_slice(), z_star.x.as_slice())
            + c * linalg::dist(z.y.as_slice(), z_star.y.as_slice())
    };
    let floor = 1e-10 * weighted(&JointPoint::zeros(z_star.x.len(), z_star.y.len())).max(1.0);
    trace
        .windows(2)
        .map(|w| {
            let before = weighted(&w[0]);
            if before < floor {
                0.0
            } else {
                weighted(&w[1]) / before
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{weighted_error, CountingOracle};
    use crate::problems::{direct_saddle, make_quadratic, separable_instance, InstanceSpec};
    use nalgebra::DVector;

    fn params(m_x: f64, m_y: f64, l_x: f64, l_xy: f64, l_y: f64) -> SmoothnessParams {
        SmoothnessParams::new(m_x, m_y, l_x, l_xy, l_y).unwrap()
    }

    #[test]
    fn rounds_formula() {
        let p = params(1.0, 1.0, 4.0, 0.0, 4.0);
        // 4·√8/1e-3 = 11313.7 → 14 rounds.
        assert_eq!(abr_rounds(&p, 1e-3), 14);
        assert_eq!(abr_rounds(&p, 1.0), 0);
        assert_eq!(abr_rounds(&p, 2.0), 0);
    }

    #[test]
    fn precondition_is_checked() {
        let p = params(1.0, 1.0, 4.0, 0.6, 4.0);
        let q = make_quadratic(&InstanceSpec::new(3, 3, p, 1)).unwrap();
        let o = CountingOracle::new(&q);
        let r = abr_solve(&o, &JointPoint::zeros(3, 3), &AbrConfig::new(1e-3, p));
        assert!(matches!(r, Err(SolverError::PreconditionViolated(_))));
    }

    #[test]
    fn epsilon_above_one_returns_start() {
        let p = params(1.0, 1.0, 4.0, 0.1, 4.0);
        let q = make_quadratic(&InstanceSpec::new(3, 3, p, 1)).unwrap();
        let o = CountingOracle::new(&q);
        let z0 = JointPoint::from_slices(&[1.0, 2.0, 3.0], &[0.0, 1.0, 0.0]).unwrap();
        let r = abr_solve(&o, &z0, &AbrConfig::new(1.5, p)).unwrap();
        assert_eq!(r.final_point, z0);
        assert_eq!(r.gradient_evals, 0);
    }

    #[test]
    fn separable_first_round_is_best_response() {
        let a = [1.0, 2.0, 4.0];
        let c = [1.0, 3.0, 4.0];
        let q = separable_instance(&a, &c, 3).unwrap();
        let p = params(1.0, 1.0, 4.0, 0.0, 4.0);
        let zs = direct_saddle(&q).unwrap();
        let o = CountingOracle::new(&q);
        let z0 = JointPoint::zeros(3, 3);
        let mut cfg = AbrConfig::new(1e-3, p);
        cfg.record_trace = true;
        let r = abr_solve(&o, &z0, &cfg).unwrap();
        let (s0, _) = weighted_error(&z0, &zs).unwrap();
        let (s1, _) = weighted_error(&r.trace[1], &zs).unwrap();
        // One round already sits within the AGD tolerance (1/16 per block).
        assert!(s1 <= s0 / 16.0);
        let (sf, _) = weighted_error(&r.final_point, &zs).unwrap();
        assert!(sf <= 1e-3 * s0);
    }

    #[test]
    fn exact_gradient_accounting() {
        let p = params(1.0, 2.0, 20.0, 0.5, 10.0);
        let q = make_quadratic(&InstanceSpec::new(5, 4, p, 2)).unwrap();
        let o = CountingOracle::new(&q);
        let r = abr_solve(&o, &JointPoint::zeros(5, 4), &AbrConfig::new(1e-4, p)).unwrap();
        let per_round = abr_inner_steps(20.0).unwrap() + abr_inner_steps(5.0).unwrap();
        assert_eq!(r.gradient_evals, abr_rounds(&p, 1e-4) * per_round);
        assert_eq!(r.gradient_evals, abr_gradient_budget(&p, 1e-4).unwrap());
        assert_eq!(r.matvec_products, 2 * r.gradient_evals);
        assert!(r.residual_history.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn cap_is_reported() {
        let p = params(1.0, 1.0, 4.0, 0.1, 4.0);
        let q = make_quadratic(&InstanceSpec::new(3, 3, p, 1)).unwrap();
        let o = CountingOracle::new(&q);
        let mut cfg = AbrConfig::new(1e-6, p);
        cfg.iteration_cap = 2;
        let r = abr_solve(&o, &JointPoint::zeros(3, 3), &cfg).unwrap();
        assert_eq!(r.termination, Termination::IterationCap);
        assert_eq!(r.outer_iterations, 2);
    }

    #[test]
    fn weakly_coupled_instance_meets_target() {
        let p = params(1.0, 2.0, 30.0, 0.4 * 2.0f64.sqrt(), 30.0);
        let q = make_quadratic(&InstanceSpec::new(20, 20, p, 12)).unwrap();
        let zs = direct_saddle(&q).unwrap();
        let o = CountingOracle::new(&q);
        let z0 = JointPoint { x: DVector::from_element(20, 1.0), y: DVector::from_element(20, -1.0) };
        let mut cfg = AbrConfig::new(1e-4, p);
        cfg.record_trace = true;
        let r = abr_solve(&o, &z0, &cfg).unwrap();
        let (s0, _) = weighted_error(&z0, &zs).unwrap();
        let (sf, _) = weighted_error(&r.final_point, &zs).unwrap();
        assert!(sf <= 1e-4 * s0, "ratio {}", sf / s0);
        for ratio in abr_round_contraction(&r.trace, &zs, &p) {
            assert!(ratio <= 0.55, "ratio {ratio}");
        }
    }

    #[test]
    fn contraction_at_solution_is_zero() {
        let zs = JointPoint::from_slices(&[1.0], &[2.0]).unwrap();
        let p = params(1.0, 1.0, 1.0, 0.0, 1.0);
        assert_eq!(abr_round_contraction(&[zs.clone(), zs.clone()], &zs, &p), [0.0]);
    }
}
