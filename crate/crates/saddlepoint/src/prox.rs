//! Inexact accelerated proximal point for minimax problems, and the
//! Proximal Best Response solver built from it.
//!
//! Three layers:
//!
//! - outer: accelerated proximal point on `x` with `β₁`, subproblem
//!   `f + β₁‖x − x̂‖²`;
//! - middle ([`appa_abr`]): accelerated proximal point on `y` with `β₂`,
//!   subproblem `g − β₂‖y − ŷ‖²`;
//! - inner: [`abr_solve`](crate::abr::abr_solve) on the doubly augmented
//!   function, which is weakly coupled because `β₁β₂ >= L_xy²`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::abr::{abr_solve, AbrConfig};
use crate::base::{
    flip_minmax, prox_augment_x, rescale, GradientOracle, JointPoint, ProxAugmentX, Result,
    SmoothnessParams, SolveMode, SolveReport, SolverError, Termination,
};
use crate::linalg;

/// When the proximal point loop stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AppaStop {
    /// Run exactly this many outer iterations.
    Iterations(u64),
    /// Stop once `‖∇f(z_t)‖ <= factor·‖∇f(z_0)‖`.
    GradientRelative(f64),
    /// Stop once `‖∇f(z_t)‖ <= threshold`.
    GradientAbsolute(f64),
    /// Stop once the gradient certifies `‖z_t − z*‖ <= epsilon·‖z_0 − z*‖`
    /// for a `modulus`-strongly monotone, `lipschitz`-smooth problem. Two
    /// certificates are accepted. The a priori one is
    /// `‖∇f(z_t)‖ <= modulus·epsilon·‖∇f(z_0)‖/(2·lipschitz)`. The
    /// a posteriori one uses `‖z_t − z*‖ <= e := ‖∇f(z_t)‖/modulus` and
    /// `‖z_0 − z*‖ >= ‖z_t − z_0‖ − e`, giving
    /// `‖∇f(z_t)‖ <= modulus·epsilon·‖z_t − z_0‖/(1 + epsilon)`.
    Certified { epsilon: f64, modulus: f64, lipschitz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppaConfig {
    pub beta: f64,
    /// Strong convexity of the proximal block.
    pub modulus: f64,
    /// Inner precision multiplier `M`; only recorded and checked here, the
    /// subsolver is responsible for meeting it.
    pub precision: f64,
    pub stop: AppaStop,
    /// Gradient-based stops also fire once the computed gradient reaches
    /// rounding level, `noise_floor·(‖z‖ + 2‖z0‖) + 8ε_mach·‖∇f(z0)‖`.
    /// The `z0` terms bound the linear part of `∇f`, which matters for
    /// warm starts already close to the solution. Zero disables the floor.
    pub noise_floor: f64,
    /// Gradient-based stops end with `Stalled` when an iteration leaves the
    /// state unchanged or the gradient norm has not halved within
    /// [`stall_window`] iterations, and with `IterationCap` after this many.
    pub iteration_cap: u64,
    pub record_trace: bool,
}

impl AppaConfig {
    pub fn new(beta: f64, modulus: f64, stop: AppaStop) -> Self {
        Self {
            beta,
            modulus,
            precision: 2.0,
            stop,
            noise_floor: 0.0,
            iteration_cap: 100_000,
            record_trace: false,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.beta / self.modulus
    }

    /// `(2√κ − 1)/(2√κ + 1)`
    pub fn theta(&self) -> f64 {
        let s = 2.0 * Float::sqrt(self.kappa());
        (s - 1.0) / (s + 1.0)
    }

    /// `1/(2√κ + 4κ)`
    pub fn tau(&self) -> f64 {
        let k = self.kappa();
        1.0 / (2.0 * Float::sqrt(k) + 4.0 * k)
    }

    fn validate(&self) -> Result<()> {
        if !(self.modulus > 0.0 && self.beta.is_finite()) {
            return Err(SolverError::InvalidConfig("APPA modulus must be positive"));
        }
        if self.beta < self.modulus * (1.0 - 1e-12) {
            return Err(SolverError::InvalidConfig("APPA needs beta >= modulus"));
        }
        if !(self.precision > 1.0) {
            return Err(SolverError::InvalidConfig("APPA precision multiplier must exceed 1"));
        }
        if self.iteration_cap == 0 {
            return Err(SolverError::InvalidConfig("iteration cap must be at least 1"));
        }
        match self.stop {
            AppaStop::GradientRelative(f) | AppaStop::GradientAbsolute(f) if !(f >= 0.0) => {
                Err(SolverError::InvalidConfig("stopping threshold must be nonnegative"))
            }
            AppaStop::Certified { epsilon, modulus, lipschitz }
                if !(epsilon > 0.0 && modulus > 0.0 && lipschitz >= modulus) =>
            {
                Err(SolverError::InvalidConfig("certified stop needs epsilon > 0 and 0 < modulus <= lipschitz"))
            }
            _ => Ok(()),
        }
    }
}

/// Inexact accelerated proximal point on the `x` block.
///
/// Each iteration hands `f + β‖x − x̂_{t−1}‖²` and the warm start
/// `(x_{t−1}, y_{t−1})` to `subsolver`, then extrapolates
/// `x̂_t = x_t + θ(x_t − x_{t−1}) + τ(x_t − x̂_{t−1})`.
///
/// Gradient-based stops evaluate `∇f` once per check and those evaluations
/// are counted. The residual history uses uncounted evaluations.
pub fn appa_minimax<O, S>(
    oracle: &O,
    z0: &JointPoint,
    cfg: &AppaConfig,
    mut subsolver: S,
) -> Result<SolveReport>
where
    O: GradientOracle + ?Sized,
    S: FnMut(&ProxAugmentX<'_, O>, &JointPoint) -> Result<JointPoint>,
{
    cfg.validate()?;
    let (n, m) = oracle.dims();
    if z0.dims() != (n, m) {
        return Err(SolverError::DimensionMismatch { expected: n, got: z0.x.len() });
    }
    let evals0 = oracle.evaluations();
    let mv0 = oracle.matvec_products();
    let theta = cfg.theta();
    let tau = cfg.tau();

    let mut history = Vec::new();
    let mut trace = Vec::new();
    history.push((0, oracle.peek_norm(z0)));
    if cfg.record_trace {
        trace.push(z0.clone());
    }

    let g0 = match cfg.stop {
        AppaStop::Iterations(_) => 0.0,
        _ => oracle.eval(z0).norm(),
    };
    let threshold = |z: &JointPoint| match cfg.stop {
        AppaStop::Iterations(_) => None,
        AppaStop::GradientAbsolute(t) => Some(t),
        AppaStop::GradientRelative(f) => Some(f * g0),
        AppaStop::Certified { epsilon, modulus, lipschitz } => {
            let a_priori = g0 / (2.0 * lipschitz);
            let a_posteriori = z.distance(z0) / (1.0 + epsilon);
            Some(modulus * epsilon * a_priori.max(a_posteriori))
        }
    };
    let limit = match cfg.stop {
        AppaStop::Iterations(t) => t.min(cfg.iteration_cap),
        _ => cfg.iteration_cap,
    };

    let mut z = z0.clone();
    let mut x_hat = z0.x.as_slice().to_vec();
    let mut iterations = 0u64;
    let mut stalled = false;
    // Progress marker for the stall rule: the last gradient norm that at
    // least halved the previous mark, and when it was reached.
    let (mut mark, mut mark_at) = (g0, 0u64);
    let window = stall_window(cfg.kappa());
    let z0_norm = z0.norm();
    let floor_at = |z: &JointPoint| {
        if cfg.noise_floor > 0.0 {
            cfg.noise_floor * (z.norm() + 2.0 * z0_norm) + 8.0 * f64::EPSILON * g0
        } else {
            0.0
        }
    };
    let mut met = match (cfg.stop, threshold(z0)) {
        (AppaStop::Iterations(t), _) => t == 0,
        (_, Some(t)) => g0 <= t.max(floor_at(z0)),
        _ => false,
    };

    while !met && iterations < limit {
        let aug = prox_augment_x(oracle, cfg.beta, &x_hat)?;
        let next = subsolver(&aug, &z)?;
        if next.dims() != (n, m) {
            return Err(SolverError::DimensionMismatch { expected: n, got: next.x.len() });
        }
        if !next.is_finite() {
            return Err(SolverError::NonFinite);
        }
        let mut moved = next != z;
        for ((h, &xt), &xp) in x_hat.iter_mut().zip(next.x.iter()).zip(z.x.iter()) {
            let new = xt + theta * (xt - xp) + tau * (xt - *h);
            moved |= new != *h;
            *h = new;
        }
        z = next;
        iterations += 1;
        history.push((oracle.evaluations() - evals0, oracle.peek_norm(&z)));
        if cfg.record_trace {
            trace.push(z.clone());
        }
        met = match (cfg.stop, threshold(&z)) {
            (AppaStop::Iterations(t), _) => iterations >= t,
            (_, Some(t)) => {
                let g = oracle.eval(&z).norm();
                if g <= 0.5 * mark {
                    mark = g;
                    mark_at = iterations;
                }
                let ok = g <= t.max(floor_at(&z));
                if !ok && (!moved || iterations - mark_at >= window) {
                    stalled = true;
                    break;
                }
                ok
            }
            _ => false,
        };
    }

    Ok(SolveReport {
        outer_iterations: iterations,
        gradient_evals: oracle.evaluations() - evals0,
        matvec_products: oracle.matvec_products() - mv0,
        final_point: z,
        residual_history: history,
        termination: if met {
            Termination::ToleranceMet
        } else if stalled {
            Termination::Stalled
        } else {
            Termination::IterationCap
        },
        trace,
    })
}

/// Iterations a gradient-stopped loop may go without halving its gradient
/// norm before it is declared stalled: ten times the `8√κ·ln 2` the
/// contraction rate needs, and at least 50.
///
/// Nested solves warm-started near their solution can sit at a level set by
/// the inexactness of their own subsolvers, well above the arithmetic
/// rounding floor, and creep there indefinitely.
pub fn stall_window(kappa: f64) -> u64 {
    let t = 10.0 * 8.0 * Float::sqrt(kappa) * core::f64::consts::LN_2;
    (Float::ceil(t) as u64).max(50)
}

/// Outer iteration count of the inexact proximal point method:
/// `⌈8√κ · ln(28κ²(L/m_y)√(L²/(m_x m_y))/ε)⌉` with `κ = β/m_x`.
///
/// For a `y`-side loop pass `params.swapped()`. Returns 0 when the
/// logarithm is not positive.
pub fn theorem2_iteration_bound(params: &SmoothnessParams, beta: f64, epsilon: f64) -> u64 {
    let kappa = beta / params.m_x();
    let l = params.l();
    let arg = 28.0 * kappa * kappa * (l / params.m_y()) * (l / Float::sqrt(params.m_x() * params.m_y()))
        / epsilon;
    let t = 8.0 * Float::sqrt(kappa) * Float::ln(arg);
    if t <= 0.0 {
        0
    } else {
        Float::ceil(t) as u64
    }
}

/// Whether `M >= 20κ√(2κ + L/m_p + L_xy²/(m_p m_o))·(1 + L/m_o)` holds,
/// the precision the inexact proximal point analysis assumes.
///
/// `m_p` is the modulus of the proximal block and `m_o` that of the other
/// block; `κ = β/m_p`.
pub fn check_m_hypothesis(l: f64, l_xy: f64, m_p: f64, m_o: f64, beta: f64, m: f64) -> bool {
    let kappa = beta / m_p;
    let need =
        20.0 * kappa * Float::sqrt(2.0 * kappa + l / m_p + l_xy * l_xy / (m_p * m_o)) * (1.0 + l / m_o);
    m >= need
}

/// Rounding level of `‖∇f(z)‖/‖z‖` for an `l`-smooth function. At a
/// direct-solve saddle point the computed gradient measures below
/// `1.5·ε_mach·l‖z‖` on the generated instances; the floor leaves a
/// margin of about 5.
pub fn noise_floor(l: f64) -> f64 {
    8.0 * f64::EPSILON * l
}

/// Constants of Proximal Best Response derived from the class parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbrConstants {
    pub beta1: f64,
    pub beta2: f64,
    /// `80L³/(m_x m_y)^{3/2}`
    pub m1: f64,
    /// `96L^{5/2}/(m_x m_y^{3/2})`
    pub m2: f64,
}

impl PbrConstants {
    pub fn from_params(p: &SmoothnessParams) -> Self {
        let l = p.l();
        Self {
            beta1: p.m_x().max(p.l_xy()),
            beta2: p.m_y().max(p.l_xy()),
            m1: 80.0 * l * l * l / Float::powf(p.m_x() * p.m_y(), 1.5),
            m2: 96.0 * Float::powf(l, 2.5) / (p.m_x() * Float::powf(p.m_y(), 1.5)),
        }
    }

    /// Parameters of the `y`-side loop's function: `−(f + β₁‖x − x̂‖²)`
    /// with blocks swapped.
    pub fn middle_params(&self, p: &SmoothnessParams) -> Result<SmoothnessParams> {
        SmoothnessParams::new(
            p.m_y(),
            p.m_x() + 2.0 * self.beta1,
            p.l_y(),
            p.l_xy(),
            p.l_x() + 2.0 * self.beta1,
        )
    }

    /// Declared parameters of the doubly augmented problem handed to ABR.
    pub fn abr_params(&self, p: &SmoothnessParams) -> Result<SmoothnessParams> {
        let l3 = 3.0 * p.l();
        SmoothnessParams::new(2.0 * self.beta1, 2.0 * self.beta2, l3, p.l_xy(), l3)
    }
}

/// Settings of the `y`-side proximal loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppaAbrOptions {
    pub beta1: f64,
    pub beta2: f64,
    /// Stop once `‖∇g(z_t)‖ <= stop_factor·‖∇g(z_0)‖`.
    pub stop_factor: f64,
    /// Relative target handed to each ABR call.
    pub abr_epsilon: f64,
    /// See [`AppaConfig::noise_floor`].
    pub noise_floor: f64,
    pub iteration_cap: u64,
}

impl AppaAbrOptions {
    /// Constants from the analysis: stop factor `min{m_x,m_y}/(9LM₁)` and
    /// ABR target `1/M₂`.
    pub fn theoretical(params: &SmoothnessParams) -> Result<Self> {
        let k = PbrConstants::from_params(params);
        let stop_factor = params.min_m() / (9.0 * params.l() * k.m1);
        let mid = k.middle_params(params)?;
        let t = theorem2_iteration_bound(&mid, k.beta2, stop_factor);
        Ok(Self {
            beta1: k.beta1,
            beta2: k.beta2,
            stop_factor,
            abr_epsilon: 1.0 / k.m2,
            noise_floor: noise_floor(3.0 * params.l()),
            iteration_cap: t.saturating_mul(100).max(100),
        })
    }
}

/// The `y`-side inexact proximal point loop on `g`, with ABR as the
/// subsolver.
///
/// `params` are the parameters of the original `f` (before the `β₁`
/// augmentation that produced `g`); they fix the declared constants of the
/// ABR subproblems. Returns a report with `IterationCap` when the loop runs
/// out of iterations.
pub fn appa_abr<O: GradientOracle + ?Sized>(
    g: &O,
    z0: &JointPoint,
    params: &SmoothnessParams,
    opts: &AppaAbrOptions,
) -> Result<SolveReport> {
    let l3 = 3.0 * params.l();
    let abr_params =
        SmoothnessParams::new(2.0 * opts.beta1, 2.0 * opts.beta2, l3, params.l_xy(), l3)?;
    if !abr_params.weakly_coupled() {
        return Err(SolverError::PreconditionViolated("beta1·beta2 must be at least L_xy²"));
    }
    let flipped = flip_minmax(g);
    let mut cfg = AppaConfig::new(opts.beta2, params.m_y(), AppaStop::GradientRelative(opts.stop_factor));
    cfg.iteration_cap = opts.iteration_cap;
    cfg.noise_floor = opts.noise_floor;
    let abr_cfg = AbrConfig::new(opts.abr_epsilon, abr_params);
    let report = appa_minimax(&flipped, &z0.swapped(), &cfg, |aug, warm| {
        let back = flip_minmax(aug);
        let r = abr_solve(&back, &warm.swapped(), &abr_cfg)?;
        Ok(r.final_point.swapped())
    })?;
    Ok(SolveReport {
        final_point: report.final_point.swapped(),
        trace: report.trace.iter().map(JointPoint::swapped).collect(),
        ..report
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbrConfig {
    /// Target ratio `‖z_T − z*‖/‖z_0 − z*‖`.
    pub epsilon: f64,
    pub mode: SolveMode,
    /// Practical mode: relative gradient target of each `y`-side loop.
    pub middle_tol: f64,
    /// Practical mode: relative target of each ABR call.
    pub abr_tol: f64,
    /// Safety caps are this multiple of the theoretical iteration counts.
    pub cap_multiplier: u64,
    pub record_trace: bool,
}

impl PbrConfig {
    pub fn new(epsilon: f64, mode: SolveMode) -> Self {
        Self { epsilon, mode, middle_tol: 1e-2, abr_tol: 1e-2, cap_multiplier: 100, record_trace: false }
    }
}

/// Proximal Best Response.
///
/// Balances `L_x` and `L_y` first when they differ (tightening `ε` by the
/// distortion of the coordinate map), then runs the outer `x`-side
/// proximal loop with [`appa_abr`] as subsolver.
///
/// Theoretical mode runs the outer loop for `T̂(β₁, ε/√2)` iterations with
/// the analysis constants everywhere. Practical mode stops on the
/// gradient certificate [`AppaStop::Certified`] with modulus
/// `min{m_x,m_y}` and uses `middle_tol`/`abr_tol` for the inner layers.
pub fn pbr_solve<O: GradientOracle + ?Sized>(
    oracle: &O,
    z0: &JointPoint,
    params: &SmoothnessParams,
    cfg: &PbrConfig,
) -> Result<SolveReport> {
    if !(cfg.epsilon > 0.0) {
        return Err(SolverError::InvalidConfig("epsilon must be positive"));
    }
    let (n, m) = oracle.dims();
    if z0.dims() != (n, m) {
        return Err(SolverError::DimensionMismatch { expected: n, got: z0.x.len() });
    }
    if params.l_x() == params.l_y() {
        return pbr_balanced(oracle, z0, params, cfg.epsilon, cfg);
    }
    let (scaled, p2, map) = rescale(oracle, params)?;
    let eps = cfg.epsilon / map.distortion();
    let r = pbr_balanced(&scaled, &map.from_original(z0), &p2, eps, cfg)?;
    Ok(SolveReport {
        final_point: map.to_original(&r.final_point),
        trace: r.trace.iter().map(|z| map.to_original(z)).collect(),
        ..r
    })
}

fn pbr_balanced<O: GradientOracle + ?Sized>(
    oracle: &O,
    z0: &JointPoint,
    params: &SmoothnessParams,
    epsilon: f64,
    cfg: &PbrConfig,
) -> Result<SolveReport> {
    let k = PbrConstants::from_params(params);
    let mid = k.middle_params(params)?;
    let outer_t = theorem2_iteration_bound(params, k.beta1, epsilon / core::f64::consts::SQRT_2);
    let (stop, cap, opts) = match cfg.mode {
        SolveMode::Theoretical => {
            let l = params.l();
            if !check_m_hypothesis(l, params.l_xy(), params.m_x(), params.m_y(), k.beta1, k.m1) {
                return Err(SolverError::PreconditionViolated("outer precision M1 below requirement"));
            }
            let l_mid = mid.l();
            if !check_m_hypothesis(l_mid, params.l_xy(), mid.m_x(), mid.m_y(), k.beta2, k.m2) {
                return Err(SolverError::PreconditionViolated("middle precision M2 below requirement"));
            }
            (AppaStop::Iterations(outer_t), outer_t.max(1), AppaAbrOptions::theoretical(params)?)
        }
        SolveMode::Practical => {
            if !(cfg.middle_tol > 0.0 && cfg.middle_tol < 1.0 && cfg.abr_tol > 0.0 && cfg.abr_tol < 1.0) {
                return Err(SolverError::InvalidConfig("inner tolerances must lie in (0, 1)"));
            }
            let mid_t = theorem2_iteration_bound(&mid, k.beta2, cfg.middle_tol);
            let opts = AppaAbrOptions {
                beta1: k.beta1,
                beta2: k.beta2,
                stop_factor: cfg.middle_tol,
                abr_epsilon: cfg.abr_tol,
                noise_floor: noise_floor(3.0 * params.l()),
                iteration_cap: mid_t.saturating_mul(cfg.cap_multiplier).max(100),
            };
            let cap = outer_t.saturating_mul(cfg.cap_multiplier).max(100);
            let stop = AppaStop::Certified { epsilon, modulus: params.min_m(), lipschitz: params.l() };
            (stop, cap, opts)
        }
    };
    let mut outer = AppaConfig::new(k.beta1, params.m_x(), stop);
    outer.iteration_cap = cap;
    outer.record_trace = cfg.record_trace;
    // Subproblems are only solved down to the middle floor at 3L, so the
    // outer gradient cannot be resolved below that; 4L keeps it above.
    outer.noise_floor = noise_floor(4.0 * params.l());
    if cfg.mode == SolveMode::Theoretical {
        outer.precision = k.m1;
    }
    appa_minimax(oracle, z0, &outer, |aug, warm| {
        let r = appa_abr(aug, warm, params, &opts)?;
        if r.termination == Termination::IterationCap {
            return Err(SolverError::InnerIterationCap("y-side proximal loop"));
        }
        Ok(r.final_point)
    })
}

/// Summed-error sequence of a trace against a known saddle point.
pub fn trace_errors(trace: &[JointPoint], z_star: &JointPoint) -> Vec<f64> {
    trace
        .iter()
        .map(|z| {
            linalg::dist(z.x.as_slice(), z_star.x.as_slice())
                + linalg::dist(z.y.as_slice(), z_star.y.as_slice())
        })
        .collect()
}
