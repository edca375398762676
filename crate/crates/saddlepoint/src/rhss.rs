//! Recursive Hermitian/skew-Hermitian splitting for quadratic saddle
//! problems `Jz = b`, with `J = G + S`, `G = diag(A, C)` and
//! `S = [[0, B], [−Bᵀ, 0]]`.
//!
//! One outer iteration:
//!
//! ```text
//! (ηP + G) z_{t+½} = (ηP − S) z_t + b        conjugate gradient
//! (ηP + S) z_{t+1} = (ηP − G) z_{t+½} + b    recursive call, depth k − 1
//! ```
//!
//! with `P = diag(αI + βA, I + βC)`. The second system is itself a
//! quadratic saddle problem, so the recursion bottoms out in Proximal Best
//! Response.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::abr::{abr_solve, AbrConfig};
use crate::base::{
    balanced_params, balancing_map, CountingOracle, JointPoint, Result, SmoothnessParams,
    SolveMode, SolveReport, SolverError, Termination,
};
use crate::linalg;
use crate::problems::QuadraticSaddle;
use crate::prox::{noise_floor, pbr_solve, PbrConfig};

/// Default constants for [`optimal_k`] and [`theorem4_bound`].
pub const DEFAULT_C1: f64 = 20.0;
pub const DEFAULT_C2: f64 = 8.0;

// ---------------------------------------------------------------------------
// Conjugate gradient

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Absolute residual floor; the stop is `‖r‖ <= max(ε‖r_0‖, floor)`.
    pub abs_floor: f64,
    pub max_iter: u64,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { abs_floor: 0.0, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: u64,
    pub converged: bool,
    /// Norm of the recursively updated residual at exit.
    pub residual: f64,
}

/// `⌈√κ · ln(2√κ/ε)⌉`
pub fn cg_iteration_bound(kappa: f64, epsilon: f64) -> u64 {
    let s = Float::sqrt(kappa);
    Float::ceil(s * Float::ln(2.0 * s / epsilon)).max(0.0) as u64
}

/// Conjugate gradient on an SPD operator, in place on `x`.
///
/// Stops when `‖r_k‖ <= ε‖b − Ax_0‖` (or the absolute floor). `apply` is
/// called once for the initial residual and once per iteration.
pub fn cg<F>(mut apply: F, b: &[f64], x: &mut [f64], epsilon: f64, opts: &CgOptions) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let dim = b.len();
    if x.len() != dim {
        return Err(SolverError::DimensionMismatch { expected: dim, got: x.len() });
    }
    let mut r = vec![0.0; dim];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rr = linalg::norm_sq(&r);
    let r0 = Float::sqrt(rr);
    let target = (epsilon * r0).max(opts.abs_floor);
    if r0 <= target {
        return Ok(CgOutcome { iterations: 0, converged: true, residual: r0 });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; dim];
    let mut k = 0u64;
    while k < opts.max_iter {
        apply(&p, &mut ap);
        k += 1;
        let pap = linalg::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolverError::Breakdown);
        }
        let step = rr / pap;
        linalg::axpy(step, &p, x);
        linalg::axpy(-step, &ap, &mut r);
        let rr_new = linalg::norm_sq(&r);
        let res = Float::sqrt(rr_new);
        if res <= target {
            return Ok(CgOutcome { iterations: k, converged: true, residual: res });
        }
        let mom = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + mom * *pi;
        }
        rr = rr_new;
    }
    Ok(CgOutcome { iterations: k, converged: false, residual: Float::sqrt(rr) })
}

// ---------------------------------------------------------------------------
// Splitting operators

/// The splitting of one quadratic at depth `k`.
///
/// Expects normalized parameters (`L_x = L_y`, `m_x <= m_y`) with
/// `L_xy > 0`.
#[derive(Debug, Clone, Copy)]
pub struct HssOperators<'a> {
    q: &'a QuadraticSaddle,
    /// `m_x/m_y`
    pub alpha: f64,
    /// `L_xy^{−2/k} m_y^{−(k−2)/k}`
    pub beta: f64,
    /// `L_xy^{1/k} m_y^{1−1/k}`
    pub eta: f64,
    pub k: u32,
}

impl<'a> HssOperators<'a> {
    pub fn new(q: &'a QuadraticSaddle, params: &SmoothnessParams, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(SolverError::InvalidConfig("recursion depth k must be at least 1"));
        }
        if !(params.l_xy() > 0.0) {
            return Err(SolverError::InvalidParams("splitting needs L_xy > 0"));
        }
        let kf = k as f64;
        let (lxy, my) = (params.l_xy(), params.m_y());
        Ok(Self {
            q,
            alpha: params.m_x() / my,
            beta: Float::powf(lxy, -2.0 / kf) * Float::powf(my, -(kf - 2.0) / kf),
            eta: Float::powf(lxy, 1.0 / kf) * Float::powf(my, 1.0 - 1.0 / kf),
            k,
        })
    }

    pub fn quadratic(&self) -> &'a QuadraticSaddle {
        self.q
    }

    fn dims(&self) -> (usize, usize) {
        (self.q.n(), self.q.m())
    }

    /// `out = (ηP + G) z`; 2 products.
    pub fn apply_p_plus_g(&self, z: &[f64], out: &mut [f64]) {
        self.apply_p_g(z, out, 1.0);
    }

    /// `out = (ηP − G) z`; 2 products.
    pub fn apply_p_minus_g(&self, z: &[f64], out: &mut [f64]) {
        self.apply_p_g(z, out, -1.0);
    }

    fn apply_p_g(&self, z: &[f64], out: &mut [f64], sign: f64) {
        let (n, _) = self.dims();
        let (zx, zy) = z.split_at(n);
        let (ox, oy) = out.split_at_mut(n);
        let w = self.eta * self.beta + sign;
        linalg::gemv(self.q.a(), zx, ox);
        for (o, xi) in ox.iter_mut().zip(zx) {
            *o = w * *o + self.eta * self.alpha * xi;
        }
        linalg::gemv(self.q.c(), zy, oy);
        for (o, yi) in oy.iter_mut().zip(zy) {
            *o = w * *o + self.eta * yi;
        }
    }

    /// `out = (ηP − S) z`; 4 products.
    pub fn apply_p_minus_s(&self, z: &[f64], out: &mut [f64]) {
        let (n, _) = self.dims();
        let (zx, zy) = z.split_at(n);
        let (ox, oy) = out.split_at_mut(n);
        let eb = self.eta * self.beta;
        linalg::gemv(self.q.a(), zx, ox);
        for (o, xi) in ox.iter_mut().zip(zx) {
            *o = eb * *o + self.eta * self.alpha * xi;
        }
        linalg::gemv_sub(self.q.b(), zy, ox);
        linalg::gemv(self.q.c(), zy, oy);
        for (o, yi) in oy.iter_mut().zip(zy) {
            *o = eb * *o + self.eta * yi;
        }
        linalg::gemv_t_acc(self.q.b(), zx, oy);
    }

    /// `out = Jz − b`; 4 products.
    pub fn residual(&self, z: &[f64], out: &mut [f64]) {
        let (n, _) = self.dims();
        let (zx, zy) = z.split_at(n);
        let (ox, oy) = out.split_at_mut(n);
        linalg::gemv(self.q.a(), zx, ox);
        linalg::gemv_acc(self.q.b(), zy, ox);
        for (o, ui) in ox.iter_mut().zip(self.q.u().iter()) {
            *o += ui;
        }
        linalg::gemv(self.q.c(), zy, oy);
        let mut bt = vec![0.0; oy.len()];
        linalg::gemv_t(self.q.b(), zx, &mut bt);
        for ((o, t), vi) in oy.iter_mut().zip(&bt).zip(self.q.v().iter()) {
            *o = *o - t - vi;
        }
    }

    /// Adds `b = [−u; v]` to `out`.
    fn add_rhs(&self, out: &mut [f64]) {
        let (n, _) = self.dims();
        let (ox, oy) = out.split_at_mut(n);
        linalg::axpy(-1.0, self.q.u().as_slice(), ox);
        linalg::axpy(1.0, self.q.v().as_slice(), oy);
    }

    /// The second half-step as a quadratic: `A' = η(αI + βA)`,
    /// `C' = η(I + βC)`, `B' = B`, zero linear terms.
    pub fn subproblem(&self) -> Result<QuadraticSaddle> {
        let (n, m) = self.dims();
        let a = DMatrix::identity(n, n) * (self.eta * self.alpha) + self.q.a() * (self.eta * self.beta);
        let c = DMatrix::identity(m, m) * self.eta + self.q.c() * (self.eta * self.beta);
        QuadraticSaddle::new(a, self.q.b().clone(), c, DVector::zeros(n), DVector::zeros(m))
    }

    /// Declared parameters of [`subproblem`](Self::subproblem):
    /// `(ηα, η, η(1 + βL_x), L_xy, η(1 + βL_x))`.
    pub fn subproblem_params(&self, params: &SmoothnessParams) -> Result<SmoothnessParams> {
        let l = self.eta * (1.0 + self.beta * params.l_x().max(params.l_y()));
        SmoothnessParams::new(self.eta * self.alpha, self.eta, l, params.l_xy(), l)
    }

    // Dense forms, for tests and validation at small sizes.

    pub fn g_matrix(&self) -> DMatrix<f64> {
        let (n, m) = self.dims();
        let mut g = DMatrix::zeros(n + m, n + m);
        g.view_mut((0, 0), (n, n)).copy_from(self.q.a());
        g.view_mut((n, n), (m, m)).copy_from(self.q.c());
        g
    }

    pub fn s_matrix(&self) -> DMatrix<f64> {
        let (n, m) = self.dims();
        let mut s = DMatrix::zeros(n + m, n + m);
        s.view_mut((0, n), (n, m)).copy_from(self.q.b());
        s.view_mut((n, 0), (m, n)).copy_from(&(-self.q.b().transpose()));
        s
    }

    pub fn p_matrix(&self) -> DMatrix<f64> {
        let (n, m) = self.dims();
        let mut p = DMatrix::zeros(n + m, n + m);
        p.view_mut((0, 0), (n, n))
            .copy_from(&(DMatrix::identity(n, n) * self.alpha + self.q.a() * self.beta));
        p.view_mut((n, n), (m, m))
            .copy_from(&(DMatrix::identity(m, m) + self.q.c() * self.beta));
        p
    }

    /// `M(η) = (ηP + S)⁻¹(ηP − G)(ηP + G)⁻¹(ηP − S)`
    pub fn iteration_matrix(&self) -> Result<DMatrix<f64>> {
        let ep = self.p_matrix() * self.eta;
        let g = self.g_matrix();
        let s = self.s_matrix();
        let right = (&ep + &g).lu().solve(&(&ep - &s)).ok_or(SolverError::Singular)?;
        let mid = (&ep - &g) * right;
        (&ep + &s).lu().solve(&mid).ok_or(SolverError::Singular)
    }

    /// Eigenvalues of `P⁻¹G`, computed as those of `P^{−½}GP^{−½}`.
    pub fn preconditioned_spectrum(&self) -> Vec<f64> {
        let p = nalgebra::SymmetricEigen::new(self.p_matrix());
        let inv_sqrt = DVector::from_iterator(
            p.eigenvalues.len(),
            p.eigenvalues.iter().map(|l| 1.0 / Float::sqrt(*l)),
        );
        let half = &p.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * p.eigenvectors.transpose();
        let sym = &half * self.g_matrix() * &half;
        let sym = (&sym + sym.transpose()) * 0.5;
        nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
    }

    /// `N = ηP^{½} + P^{−½}S`. The iteration matrix satisfies
    /// `‖N M(η) N⁻¹‖₂ <= max |(λ − η)/(λ + η)|`, so the splitting contracts
    /// in the norm `‖N·‖₂`. The Euclidean norm of `M(η)` itself can exceed
    /// one when `P` is far from a multiple of the identity.
    pub fn contraction_norm_matrix(&self) -> DMatrix<f64> {
        let p = nalgebra::SymmetricEigen::new(self.p_matrix());
        let root = |e: f64| {
            let v = DVector::from_iterator(p.eigenvalues.len(), p.eigenvalues.iter().map(|l| Float::powf(*l, e)));
            &p.eigenvectors * DMatrix::from_diagonal(&v) * p.eigenvectors.transpose()
        };
        root(0.5) * self.eta + root(-0.5) * self.s_matrix()
    }

    /// `N M(η) N⁻¹` with `N` from [`Self::contraction_norm_matrix`].
    pub fn normalized_iteration_matrix(&self) -> Result<DMatrix<f64>> {
        let nm = self.contraction_norm_matrix();
        let prod = &nm * self.iteration_matrix()?;
        // (N M N⁻¹)ᵀ = N⁻ᵀ (N M)ᵀ
        let t = nm.transpose().lu().solve(&prod.transpose()).ok_or(SolverError::Singular)?;
        Ok(t.transpose())
    }

    /// `max over λ in sp(P⁻¹G) of |(λ − η)/(λ + η)|`
    pub fn lemma1_bound(&self) -> f64 {
        self.preconditioned_spectrum()
            .iter()
            .map(|l| ((l - self.eta) / (l + self.eta)).abs())
            .fold(0.0, f64::max)
    }
}

/// One splitting step with dense direct inner solves.
pub fn hss_exact_step(ops: &HssOperators<'_>, z_t: &JointPoint) -> Result<JointPoint> {
    let n = ops.q.n();
    let z = z_t.stacked();
    let b = ops.q.rhs();
    let ep = ops.p_matrix() * ops.eta;
    let g = ops.g_matrix();
    let s = ops.s_matrix();
    let r = (&ep - &s) * &z + &b;
    let half = (&ep + &g).lu().solve(&r).ok_or(SolverError::Singular)?;
    let w = (&ep - &g) * half + &b;
    let next = (&ep + &s).lu().solve(&w).ok_or(SolverError::Singular)?;
    Ok(JointPoint::from_stacked(next.as_slice(), n))
}

// ---------------------------------------------------------------------------
// Constants and bounds

/// `1 − ½(m_y/L_xy)^{1/k}`: per-step contraction of the exact splitting.
pub fn contraction_factor(params: &SmoothnessParams, k: u32) -> f64 {
    1.0 - 0.5 * Float::powf(params.m_y() / params.l_xy(), 1.0 / k as f64)
}

/// `1 − ¼(m_y/L_xy)^{1/k}`: per-iteration contraction with inexact inner
/// solves.
pub fn inexact_contraction_factor(params: &SmoothnessParams, k: u32) -> f64 {
    1.0 - 0.25 * Float::powf(params.m_y() / params.l_xy(), 1.0 / k as f64)
}

/// Precision constants of one recursion level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhssConstants {
    /// `192L⁵/(m_x² m_y³)`: relative residual target of the CG half-step.
    pub m1: f64,
    /// `16L_xy/m_y`: error target of the recursive half-step.
    pub m2: f64,
    /// `m_x ε/(L_xy + L_x)`: relative residual target of the outer loop.
    pub eps_tilde: f64,
}

impl RhssConstants {
    pub fn new(params: &SmoothnessParams, epsilon: f64) -> Self {
        let l = params.l();
        Self {
            m1: 192.0 * Float::powi(l, 5) / (params.m_x().powi(2) * params.m_y().powi(3)),
            m2: 16.0 * params.l_xy() / params.m_y(),
            eps_tilde: params.m_x() * epsilon / (params.l_xy() + params.l_x()),
        }
    }
}

/// `round(√(ln R / (2 ln(C₁ ln R))))` with `R = L²/(m_x m_y)`, at least 1.
pub fn optimal_k(params: &SmoothnessParams, c1: f64) -> u32 {
    let l = params.l();
    let ln_r = Float::ln(l * l / (params.m_x() * params.m_y()));
    let denom = 2.0 * Float::ln(c1 * ln_r);
    if !(ln_r > 0.0) || !(denom > 0.0) {
        return 1;
    }
    let k = Float::round(Float::sqrt(ln_r / denom));
    if k < 1.0 {
        1
    } else {
        k as u32
    }
}

/// Matrix-vector complexity bound for depth `k`:
///
/// `√(L_xy²/(m_x m_y) + (κ_x + κ_y)(1 + (L_xy/max{m_x,m_y})^{1/k}))
///  · (C₁ ln(C₂L²/(m_x m_y)))^{k+3} · ln(z0_error/ε)`
pub fn theorem4_bound(params: &SmoothnessParams, k: u32, epsilon: f64, z0_error: f64, c1: f64, c2: f64) -> f64 {
    rhss_leading_term(params, k)
        * Float::powi(c1 * Float::ln(c2 * params.l() * params.l() / (params.m_x() * params.m_y())), k as i32 + 3)
        * Float::ln(z0_error / epsilon)
}

/// The square-root factor of [`theorem4_bound`].
pub fn rhss_leading_term(params: &SmoothnessParams, k: u32) -> f64 {
    let lxy = params.l_xy();
    let coupling = lxy * lxy / (params.m_x() * params.m_y());
    let kappas = params.kappa_x() + params.kappa_y();
    Float::sqrt(coupling + kappas * (1.0 + Float::powf(lxy / params.max_m(), 1.0 / k as f64)))
}

// ---------------------------------------------------------------------------
// Solver

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhssConfig {
    pub k: u32,
    /// Target ratio `‖z_T − z*‖/‖z_0 − z*‖`.
    pub epsilon: f64,
    pub mode: SolveMode,
    /// Outer iteration cap; `None` means 100 times the count implied by
    /// the inexact contraction factor.
    pub iteration_cap: Option<u64>,
    /// Practical mode: relative residual target of the CG half-step.
    pub cg_tol: f64,
    /// Settings passed to the Proximal Best Response base case.
    pub pbr_middle_tol: f64,
    pub pbr_abr_tol: f64,
    pub record_trace: bool,
}

impl RhssConfig {
    pub fn new(k: u32, epsilon: f64, mode: SolveMode) -> Self {
        Self {
            k,
            epsilon,
            mode,
            iteration_cap: None,
            cg_tol: 1e-4,
            pbr_middle_tol: 1e-2,
            pbr_abr_tol: 1e-2,
            record_trace: false,
        }
    }
}

/// Smallest epsilon honored in Theoretical mode; below it the residual
/// certificate is dominated by rounding.
pub const THEORETICAL_EPS_FLOOR: f64 = 1e-12;

/// Recursive splitting solver for a quadratic with declared `params`.
///
/// Balances `L_x = L_y` and swaps the blocks if `m_x > m_y`, then
/// dispatches: ABR when weakly coupled, Proximal Best Response when
/// `L_xy <= m_y` or `k = 1`, the splitting iteration otherwise. The
/// outer loop stops on `‖Jz_t − b‖ <= ε̃‖Jz_0 − b‖`.
///
/// `residual_history` is indexed by matrix-vector products, and
/// `gradient_evals` counts only the oracle calls of base-case solvers.
pub fn rhss_solve(
    q: &QuadraticSaddle,
    params: &SmoothnessParams,
    z0: &JointPoint,
    cfg: &RhssConfig,
) -> Result<SolveReport> {
    if cfg.k == 0 {
        return Err(SolverError::InvalidConfig("recursion depth k must be at least 1"));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(SolverError::InvalidConfig("epsilon must be positive"));
    }
    if !(cfg.cg_tol > 0.0 && cfg.cg_tol < 1.0) {
        return Err(SolverError::InvalidConfig("cg_tol must lie in (0, 1)"));
    }
    if z0.dims() != (q.n(), q.m()) {
        return Err(SolverError::DimensionMismatch { expected: q.n(), got: z0.x.len() });
    }
    let mut eps = cfg.epsilon;
    if cfg.mode == SolveMode::Theoretical {
        eps = eps.max(THEORETICAL_EPS_FLOOR);
    }

    // Normalize: L_x = L_y, then m_x <= m_y.
    let map = if params.l_x() == params.l_y() {
        crate::base::ScaleMap { a: 1.0, b: 1.0 }
    } else {
        balancing_map(params)
    };
    let mut p = balanced_params(params);
    let mut qn = if map.a == 1.0 { q.clone() } else { q.rescaled(map.a, map.b) };
    let mut zn = map.from_original(z0);
    eps /= map.distortion();
    let swap = p.m_x() > p.m_y();
    if swap {
        qn = qn.flipped();
        p = p.swapped();
        zn = zn.swapped();
    }

    let r = solve_level(&qn, &p, &zn, eps, cfg.k, cfg, true)?;
    let back = |z: &JointPoint| {
        let z = if swap { z.swapped() } else { z.clone() };
        map.to_original(&z)
    };
    Ok(SolveReport {
        final_point: back(&r.final_point),
        trace: r.trace.iter().map(back).collect(),
        ..r
    })
}

/// Dispatch at one recursion level; `params` are normalized.
fn solve_level(
    q: &QuadraticSaddle,
    params: &SmoothnessParams,
    z0: &JointPoint,
    eps: f64,
    k: u32,
    cfg: &RhssConfig,
    top: bool,
) -> Result<SolveReport> {
    let oracle = CountingOracle::new(q);
    let report = if params.weakly_coupled() {
        let mut abr = AbrConfig::new(eps / core::f64::consts::SQRT_2, *params);
        abr.record_trace = cfg.record_trace && top;
        abr_solve(&oracle, z0, &abr)?
    } else if params.l_xy() <= params.m_y() || k == 1 {
        let mut pbr = PbrConfig::new(eps, cfg.mode);
        pbr.middle_tol = cfg.pbr_middle_tol;
        pbr.abr_tol = cfg.pbr_abr_tol;
        pbr.record_trace = cfg.record_trace && top;
        pbr_solve(&oracle, z0, params, &pbr)?
    } else {
        return rhss_iterate(q, params, z0, eps, k, cfg, top);
    };
    if !top && report.termination == Termination::IterationCap {
        return Err(SolverError::InnerIterationCap("base case of the recursion"));
    }
    Ok(report)
}

fn rhss_iterate(
    q: &QuadraticSaddle,
    params: &SmoothnessParams,
    z0: &JointPoint,
    eps: f64,
    k: u32,
    cfg: &RhssConfig,
    top: bool,
) -> Result<SolveReport> {
    let (n, m) = (q.n(), q.m());
    let dim = n + m;
    let ops = HssOperators::new(q, params, k)?;
    let consts = RhssConstants::new(params, eps);
    let mut sub = ops.subproblem()?;
    let sub_params = ops.subproblem_params(params)?;
    let cg_eps = match cfg.mode {
        SolveMode::Theoretical => 1.0 / consts.m1,
        SolveMode::Practical => cfg.cg_tol,
    };
    let sub_eps = 1.0 / consts.m2;
    let rate = inexact_contraction_factor(params, k);
    let planned = Float::ceil(
        Float::ln((params.l_xy() + params.l_x()) / (params.m_x() * consts.eps_tilde)) / -Float::ln(rate),
    ) as u64;
    let cap = cfg.iteration_cap.unwrap_or_else(|| planned.saturating_mul(100).max(100));
    // Bound on CG iterations for ηP + G, used as its safety cap.
    let cg_kappa = (ops.eta * ops.alpha + (ops.eta * ops.beta + 1.0) * params.l_x())
        / (ops.eta * ops.alpha + (ops.eta * ops.beta + 1.0) * params.m_x());
    let cg_cap = 10 * cg_iteration_bound(cg_kappa, cg_eps.max(1e-16)) + 50;

    let mut matvecs = 0u64;
    let mut grads = 0u64;
    let mut z = z0.stacked().as_slice().to_vec();
    let mut buf = vec![0.0; dim];
    let mut rhs = vec![0.0; dim];

    ops.residual(&z, &mut buf);
    matvecs += 4;
    let r0 = linalg::norm(&buf);
    // A priori certificate `eps_tilde·r0`, or the a posteriori one
    // `‖z − z*‖ <= res/m_x` with `‖z0 − z*‖ >= ‖z − z0‖ − res/m_x`.
    let start = z.clone();
    let target = |z: &[f64]| {
        let moved = linalg::dist(z, &start) / (1.0 + eps);
        (consts.eps_tilde * r0).max(params.m_x() * eps * moved)
    };
    // Rounding level of the computed residual; the `z0` terms bound the
    // linear part, which dominates on warm-started inner levels.
    let z0_norm = linalg::norm(&z);
    let res_floor = |z: &[f64]| {
        noise_floor(params.l()) * (linalg::norm(z) + 2.0 * z0_norm) + 8.0 * f64::EPSILON * r0
    };
    let mut history = vec![(0, r0)];
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(z0.clone());
    }
    let mut met = r0 <= target(&z).max(res_floor(&z));
    let mut stalled = false;
    // Same stall rule as the proximal loops: no halving of the residual
    // within ten times the iterations the contraction rate needs.
    let window = (Float::ceil(10.0 * core::f64::consts::LN_2 / -Float::ln(rate)) as u64).max(50);
    let (mut mark, mut mark_at) = (r0, 0u64);
    let mut iterations = 0u64;

    while !met && iterations < cap {
        // First half-step.
        ops.apply_p_minus_s(&z, &mut rhs);
        ops.add_rhs(&mut rhs);
        matvecs += 4;
        let mut half = z.clone();
        let floor = 64.0 * f64::EPSILON * linalg::norm(&rhs);
        let out = cg(
            |v, o| ops.apply_p_plus_g(v, o),
            &rhs,
            &mut half,
            cg_eps,
            &CgOptions { abs_floor: floor, max_iter: cg_cap },
        )?;
        matvecs += 2 * (out.iterations + 1);
        if !out.converged {
            return Err(SolverError::InnerIterationCap("conjugate gradient half-step"));
        }

        // Second half-step, recursively.
        ops.apply_p_minus_g(&half, &mut rhs);
        ops.add_rhs(&mut rhs);
        matvecs += 2;
        let (wx, wy) = rhs.split_at(n);
        let neg_wx: Vec<f64> = wx.iter().map(|v| -v).collect();
        sub.set_linear(&neg_wx, wy);
        let warm = JointPoint::from_slices(&z[..n], &z[n..])?;
        let r = solve_level(&sub, &sub_params, &warm, sub_eps, k - 1, cfg, false)?;
        matvecs += r.matvec_products;
        grads += r.gradient_evals;
        let moved = r.final_point.x.as_slice() != &z[..n] || r.final_point.y.as_slice() != &z[n..];
        z[..n].copy_from_slice(r.final_point.x.as_slice());
        z[n..].copy_from_slice(r.final_point.y.as_slice());
        if z.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        iterations += 1;

        ops.residual(&z, &mut buf);
        matvecs += 4;
        let res = linalg::norm(&buf);
        history.push((matvecs, res));
        if cfg.record_trace {
            trace.push(JointPoint::from_stacked(&z, n));
        }
        met = res <= target(&z).max(res_floor(&z));
        if res <= 0.5 * mark {
            mark = res;
            mark_at = iterations;
        }
        // The map from z to the next iterate is deterministic, so an
        // unmoved iterate never moves again.
        if !met && (!moved || iterations - mark_at >= window) {
            stalled = true;
            break;
        }
    }

    if !met && !stalled && !top {
        return Err(SolverError::InnerIterationCap("splitting iteration"));
    }
    Ok(SolveReport {
        outer_iterations: iterations,
        gradient_evals: grads,
        matvec_products: matvecs,
        final_point: JointPoint::from_stacked(&z, n),
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
