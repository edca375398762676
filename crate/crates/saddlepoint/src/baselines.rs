//! Gradient Descent-Ascent and ExtraGradient on the monotone operator
//! `F(z) = (∇_x f, −∇_y f)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::base::{
    certified_gradient_threshold, GradientOracle, JointPoint, Result, SmoothnessParams,
    SolveReport, SolverError, Termination,
};
use crate::linalg;

/// Growth of `‖F‖` over `‖F(z_0)‖` treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineAlgorithm {
    Gda,
    ExtraGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineStop {
    /// Run exactly this many iterations.
    Iterations(u64),
    /// Stop when `‖F(z)‖ <= threshold`.
    GradientAbsolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub algorithm: BaselineAlgorithm,
    pub step: f64,
    pub stop: BaselineStop,
    pub iteration_cap: u64,
    pub record_trace: bool,
}

impl BaselineConfig {
    /// GDA with step `min{m_x,m_y}/(2L²)`.
    pub fn gda(params: &SmoothnessParams, stop: BaselineStop) -> Self {
        let l = params.l();
        Self {
            algorithm: BaselineAlgorithm::Gda,
            step: params.min_m() / (2.0 * l * l),
            stop,
            iteration_cap: 10_000_000,
            record_trace: false,
        }
    }

    /// ExtraGradient with step `1/(2L)`.
    pub fn extragradient(params: &SmoothnessParams, stop: BaselineStop) -> Self {
        Self {
            algorithm: BaselineAlgorithm::ExtraGradient,
            step: 1.0 / (2.0 * params.l()),
            stop,
            iteration_cap: 10_000_000,
            record_trace: false,
        }
    }
}

/// Gradient threshold certifying `‖z − z*‖ <= ε‖z_0 − z*‖`; costs one
/// counted evaluation at `z0`.
pub fn certified_stop<O: GradientOracle + ?Sized>(
    oracle: &O,
    z0: &JointPoint,
    params: &SmoothnessParams,
    epsilon: f64,
) -> BaselineStop {
    BaselineStop::GradientAbsolute(certified_gradient_threshold(params, epsilon, oracle.eval(z0).norm()))
}

pub fn gda_solve<O: GradientOracle + ?Sized>(oracle: &O, z0: &JointPoint, cfg: &BaselineConfig) -> Result<SolveReport> {
    run(oracle, z0, cfg, BaselineAlgorithm::Gda)
}

pub fn eg_solve<O: GradientOracle + ?Sized>(oracle: &O, z0: &JointPoint, cfg: &BaselineConfig) -> Result<SolveReport> {
    run(oracle, z0, cfg, BaselineAlgorithm::ExtraGradient)
}

/// Writes `F(z)` into `gx`, `gy` and returns its norm.
fn operator<O: GradientOracle + ?Sized>(oracle: &O, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) -> f64 {
    oracle.eval_into(x, y, gx, gy);
    linalg::negate(gy);
    linalg::norm2(gx, gy)
}

fn run<O: GradientOracle + ?Sized>(
    oracle: &O,
    z0: &JointPoint,
    cfg: &BaselineConfig,
    algorithm: BaselineAlgorithm,
) -> Result<SolveReport> {
    let (n, m) = oracle.dims();
    if z0.dims() != (n, m) {
        return Err(SolverError::DimensionMismatch { expected: n, got: z0.x.len() });
    }
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(SolverError::InvalidConfig("step must be positive"));
    }
    let evals0 = oracle.evaluations();
    let mv0 = oracle.matvec_products();
    let s = cfg.step;
    let mut x = z0.x.as_slice().to_vec();
    let mut y = z0.y.as_slice().to_vec();
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; m]);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; m]);
    let mut history: Vec<(u64, f64)> = Vec::new();
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(z0.clone());
    }
    let (limit, threshold) = match cfg.stop {
        BaselineStop::Iterations(t) => (t.min(cfg.iteration_cap), None),
        BaselineStop::GradientAbsolute(t) => (cfg.iteration_cap, Some(t)),
    };
    let f0 = oracle.peek_norm(z0);
    history.push((0, f0));
    let blowup = DIVERGENCE_FACTOR * f0.max(f64::MIN_POSITIVE);

    let mut iterations = 0u64;
    let mut met = limit == 0 && threshold.is_none();
    loop {
        // Under an iteration budget the operator at the current point is
        // only needed when another step follows.
        if threshold.is_none() && iterations >= limit {
            met = true;
            break;
        }
        let norm = operator(oracle, &x, &y, &mut gx, &mut gy);
        if !norm.is_finite() || norm > blowup {
            return Err(SolverError::Diverged { iteration: iterations });
        }
        if let Some(t) = threshold {
            if norm <= t {
                met = true;
                break;
            }
        }
        if iterations >= limit {
            break;
        }
        match algorithm {
            BaselineAlgorithm::Gda => {
                linalg::axpy(-s, &gx, &mut x);
                linalg::axpy(-s, &gy, &mut y);
            }
            BaselineAlgorithm::ExtraGradient => {
                let mut hx = x.clone();
                let mut hy = y.clone();
                linalg::axpy(-s, &gx, &mut hx);
                linalg::axpy(-s, &gy, &mut hy);
                operator(oracle, &hx, &hy, &mut bx, &mut by);
                linalg::axpy(-s, &bx, &mut x);
                linalg::axpy(-s, &by, &mut y);
            }
        }
        iterations += 1;
        if iterations.is_multiple_of(64) || iterations == limit {
            let z = JointPoint::from_slices(&x, &y)?;
            history.push((oracle.evaluations() - evals0, oracle.peek_norm(&z)));
        }
        if cfg.record_trace {
            trace.push(JointPoint::from_slices(&x, &y)?);
        }
    }
    let final_point = JointPoint::from_slices(&x, &y)?;
    if !final_point.is_finite() {
        return Err(SolverError::Diverged { iteration: iterations });
    }
    let evals = oracle.evaluations() - evals0;
    if history.last().map(|h| h.0) != Some(evals) {
        history.push((evals, oracle.peek_norm(&final_point)));
    }
    Ok(SolveReport {
        outer_iterations: iterations,
        gradient_evals: evals,
        matvec_products: oracle.matvec_products() - mv0,
        final_point,
        residual_history: history,
        termination: if met { Termination::ToleranceMet } else { Termination::IterationCap },
        trace,
    })
}

/// High-precision reference point by ExtraGradient: runs until
/// `‖F(z)‖ <= tol·max{1, ‖F(z_0)‖}`.
pub fn eg_reference<O: GradientOracle + ?Sized>(
    oracle: &O,
    z0: &JointPoint,
    params: &SmoothnessParams,
    tol: f64,
) -> Result<JointPoint> {
    let thr = tol * oracle.peek_norm(z0).max(1.0);
    let cfg = BaselineConfig::extragradient(params, BaselineStop::GradientAbsolute(thr));
    let r = eg_solve(oracle, z0, &cfg)?;
    if r.termination != Termination::ToleranceMet {
        return Err(SolverError::InnerIterationCap("reference ExtraGradient run"));
    }
    Ok(r.final_point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::CountingOracle;
    use crate::problems::{direct_saddle, make_log_perturbed, make_quadratic, InstanceSpec};

    fn params(m_x: f64, m_y: f64, l_x: f64, l_xy: f64, l_y: f64) -> SmoothnessParams {
        SmoothnessParams::new(m_x, m_y, l_x, l_xy, l_y).unwrap()
    }

    #[test]
    fn saddle_start_is_stationary() {
        let p = params(1.0, 1.0, 5.0, 2.0, 5.0);
        let q = make_quadratic(&InstanceSpec::new(4, 3, p, 1)).unwrap();
        let zs = direct_saddle(&q).unwrap();
        let o = CountingOracle::new(&q);
        for cfg in [
            BaselineConfig::gda(&p, BaselineStop::Iterations(20)),
            BaselineConfig::extragradient(&p, BaselineStop::Iterations(20)),
        ] {
            let r = run(&o, &zs, &cfg, cfg.algorithm).unwrap();
            assert!(r.final_point.distance(&zs) <= 1e-12);
        }
    }

    #[test]
    fn gda_converges_on_well_conditioned() {
        let p = params(1.0, 1.0, 4.0, 1.0, 4.0);
        let q = make_quadratic(&InstanceSpec::new(6, 6, p, 3)).unwrap();
        let zs = direct_saddle(&q).unwrap();
        let o = CountingOracle::new(&q);
        let z0 = JointPoint::zeros(6, 6);
        let stop = certified_stop(&o, &z0, &p, 1e-6);
        let r = gda_solve(&o, &z0, &BaselineConfig::gda(&p, stop)).unwrap();
        assert_eq!(r.termination, Termination::ToleranceMet);
        assert!(r.final_point.distance(&zs) <= 1e-6 * z0.distance(&zs));
    }

    #[test]
    fn gda_large_step_diverges() {
        let p = params(0.1, 0.1, 1.0, 10.0, 1.0);
        let q = make_quadratic(&InstanceSpec::new(4, 4, p, 5)).unwrap();
        let o = CountingOracle::new(&q);
        let mut cfg = BaselineConfig::gda(&p, BaselineStop::Iterations(10_000));
        cfg.step = 1.0;
        let r = gda_solve(&o, &JointPoint::zeros(4, 4), &cfg);
        assert!(matches!(r, Err(SolverError::Diverged { .. })));
    }

    #[test]
    fn eg_counts_two_per_iteration() {
        let p = params(1.0, 1.0, 10.0, 5.0, 10.0);
        let q = make_quadratic(&InstanceSpec::new(5, 5, p, 9)).unwrap();
        let o = CountingOracle::new(&q);
        let r = eg_solve(&o, &JointPoint::zeros(5, 5), &BaselineConfig::extragradient(&p, BaselineStop::Iterations(37)))
            .unwrap();
        assert_eq!(r.outer_iterations, 37);
        assert_eq!(r.gradient_evals, 74);
    }

    #[test]
    fn eg_reaches_target() {
        let p = params(1.0, 2.0, 50.0, 20.0, 50.0);
        let q = make_quadratic(&InstanceSpec::new(8, 8, p, 2)).unwrap();
        let zs = direct_saddle(&q).unwrap();
        let o = CountingOracle::new(&q);
        let z0 = JointPoint::zeros(8, 8);
        let stop = certified_stop(&o, &z0, &p, 1e-6);
        let r = eg_solve(&o, &z0, &BaselineConfig::extragradient(&p, stop)).unwrap();
        assert!(r.final_point.distance(&zs) <= 1e-6 * z0.distance(&zs));
    }

    #[test]
    fn reference_on_perturbed_family() {
        let p = params(1.0, 1.0, 10.0, 3.0, 10.0);
        let (f, declared) = make_log_perturbed(&InstanceSpec::new(5, 5, p, 4), 0.2).unwrap();
        let o = CountingOracle::new(&f);
        let zr = eg_reference(&o, &JointPoint::zeros(5, 5), &declared, 1e-12).unwrap();
        assert!(o.peek_norm(&zr) <= 1e-11);
    }
}
