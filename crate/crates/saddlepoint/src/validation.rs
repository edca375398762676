//! Invariant suites run on seeded instances against dense ground truth.
//!
//! Every suite returns per-check records rather than panicking, so the CLI
//! can serialize them and tests can assert on them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::abr::{abr_round_contraction, abr_solve, AbrConfig};
use crate::agd::{agd, AgdConfig};
use crate::base::{weighted_error, CountingOracle, JointPoint, Result, SmoothnessParams, SolveMode, SolverError};
use crate::linalg;
use crate::problems::{best_response_maps, direct_saddle, duality_gap, make_quadratic, InstanceSpec, QuadraticSaddle};
use crate::rhss::{
    cg, cg_iteration_bound, contraction_factor, hss_exact_step, inexact_contraction_factor, rhss_solve,
    CgOptions, HssOperators, RhssConfig,
};
use crate::SaddleFunction;

/// Relative slack for inequalities that hold exactly in exact arithmetic.
pub const REL_SLACK: f64 = 1e-9;

/// Outcome of one named inequality over many samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub samples: u64,
    pub failures: u64,
    /// Largest observed `lhs / (rhs + slack)`; 1 is the boundary.
    pub worst_ratio: f64,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        Self { name: name.into(), samples: 0, failures: 0, worst_ratio: 0.0 }
    }

    /// Records `lhs <= rhs` with relative slack `rel` and absolute slack `abs`.
    fn record(&mut self, lhs: f64, rhs: f64, rel: f64, abs: f64) {
        self.samples += 1;
        let limit = rhs + rel * rhs.abs() + abs;
        let ok = lhs.is_finite() && lhs <= limit;
        if !ok {
            self.failures += 1;
        }
        let r = if limit > 0.0 {
            lhs / limit
        } else if ok {
            0.0
        } else {
            f64::INFINITY
        };
        if r > self.worst_ratio || r.is_nan() {
            self.worst_ratio = r;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.samples > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Facts,
    HssSpectral,
    Contraction,
    AbrConformance,
    Cg,
    Agd,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Facts, Suite::HssSpectral, Suite::Contraction, Suite::AbrConformance, Suite::Cg, Suite::Agd];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Facts => "facts",
            Suite::HssSpectral => "hss-spectral",
            Suite::Contraction => "contraction",
            Suite::AbrConformance => "abr",
            Suite::Cg => "cg",
            Suite::Agd => "agd",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name)
            .ok_or(SolverError::InvalidConfig("unknown suite name"))
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Facts => facts_suite(seed, 20, 1000)?,
        Suite::HssSpectral => hss_spectral_suite(seed, 20)?,
        Suite::Contraction => rhss_contraction_suite(seed, 6)?,
        Suite::AbrConformance => abr_suite(seed, 20)?,
        Suite::Cg => cg_suite(seed)?,
        Suite::Agd => agd_suite(seed)?,
    };
    Ok(SuiteReport { suite: suite.name().into(), seed, checks })
}

struct Sampler(ChaCha20Rng);

impl Sampler {
    fn new(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
    fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        Float::exp(self.uniform(Float::ln(lo), Float::ln(hi)))
    }
    fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }
    fn seed(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.uniform(-1.0, 1.0))
    }
    fn point_near(&mut self, z: &JointPoint) -> JointPoint {
        let scale = self.log_uniform(1e-3, 1e2);
        let (n, m) = z.dims();
        JointPoint { x: &z.x + self.vector(n) * scale, y: &z.y + self.vector(m) * scale }
    }
}

/// General instance with `n, m` in `[2, max_dim]`.
fn random_instance(s: &mut Sampler, max_dim: usize) -> Result<(QuadraticSaddle, SmoothnessParams)> {
    let m_x = s.log_uniform(0.1, 2.0);
    let m_y = s.log_uniform(0.1, 2.0);
    let l_x = m_x * s.log_uniform(1.0, 1e3);
    let l_y = m_y * s.log_uniform(1.0, 1e3);
    let l_xy = if s.uniform(0.0, 1.0) < 0.1 { 0.0 } else { s.log_uniform(1e-2, l_x.max(l_y)) };
    let p = SmoothnessParams::new(m_x, m_y, l_x, l_xy, l_y)?;
    let (n, m) = (s.int(2, max_dim), s.int(2, max_dim));
    let q = make_quadratic(&InstanceSpec::new(n, m, p, s.seed()))?;
    Ok((q, p))
}

/// Instance already in the splitting solver's normal form: `L_x = L_y`,
/// `m_x <= m_y < L_xy`.
fn normalized_instance(s: &mut Sampler, max_dim: usize, max_l: f64) -> Result<(QuadraticSaddle, SmoothnessParams)> {
    let m_y = 1.0;
    let m_x = s.uniform(0.2, 1.0);
    let l = s.log_uniform(10.0, max_l);
    let l_xy = s.log_uniform(2.0, l);
    let p = SmoothnessParams::new(m_x, m_y, l, l_xy, l)?;
    let (n, m) = (s.int(2, max_dim), s.int(2, max_dim));
    let q = make_quadratic(&InstanceSpec::new(n, m, p, s.seed()))?;
    Ok((q, p))
}

/// Best-response Lipschitz bounds, envelope convexity/smoothness, the
/// error-norm sandwich, the gradient-norm sandwich and the duality-gap
/// bound.
pub fn facts_suite(seed: u64, instances: usize, points: usize) -> Result<Vec<CheckResult>> {
    let mut s = Sampler::new(seed);
    let mut lip_y = CheckResult::new("best response y*(x) is L_xy/m_y-Lipschitz");
    let mut lip_x = CheckResult::new("best response x*(y) is L_xy/m_x-Lipschitz");
    let mut phi_sc = CheckResult::new("max_y f(x, y) is m_x-strongly convex");
    let mut phi_sm = CheckResult::new("max_y f(x, y) is (L_x + L_xy^2/m_y)-smooth");
    let mut psi_sc = CheckResult::new("min_x f(x, y) is m_y-strongly concave");
    let mut psi_sm = CheckResult::new("min_x f(x, y) is (L_y + L_xy^2/m_x)-smooth");
    let mut sand_lo = CheckResult::new("summed error / sqrt 2 <= joint error");
    let mut sand_hi = CheckResult::new("joint error <= summed error");
    let mut grad_lo = CheckResult::new("min(m_x, m_y) |z - z*| <= |grad f|");
    let mut grad_hi = CheckResult::new("|grad f| <= 2L |z - z*|");
    let mut gap = CheckResult::new("duality gap <= L^2/min(m_x, m_y) |z - z*|^2");

    for _ in 0..instances {
        let (q, p) = random_instance(&mut s, 8)?;
        let zs = direct_saddle(&q)?;
        let br = best_response_maps(&q)?;
        let (n, m) = (q.n(), q.m());
        let grad_phi = |x: &DVector<f64>| {
            let y = br.y_star_of_x(x);
            let mut g = vec![0.0; n];
            q.grad_x_into(x.as_slice(), y.as_slice(), &mut g);
            DVector::from_vec(g)
        };
        let grad_psi = |y: &DVector<f64>| {
            let x = br.x_star_of_y(y);
            let mut g = vec![0.0; m];
            q.grad_y_into(x.as_slice(), y.as_slice(), &mut g);
            DVector::from_vec(g)
        };
        let scale = zs.norm().max(1.0);
        for _ in 0..points {
            let z1 = s.point_near(&zs);
            let z2 = s.point_near(&zs);
            let dx = (&z1.x - &z2.x).norm();
            let dy = (&z1.y - &z2.y).norm();
            let abs = 1e-12 * scale;

            lip_y.record((br.y_star_of_x(&z1.x) - br.y_star_of_x(&z2.x)).norm(), p.l_xy() / p.m_y() * dx, REL_SLACK, abs);
            lip_x.record((br.x_star_of_y(&z1.y) - br.x_star_of_y(&z2.y)).norm(), p.l_xy() / p.m_x() * dy, REL_SLACK, abs);

            let gphi = grad_phi(&z1.x) - grad_phi(&z2.x);
            let ddx = &z1.x - &z2.x;
            phi_sc.record(p.m_x() * dx * dx, gphi.dot(&ddx), REL_SLACK, abs * dx);
            phi_sm.record(gphi.norm(), (p.l_x() + p.l_xy() * p.l_xy() / p.m_y()) * dx, REL_SLACK, abs);
            let gpsi = grad_psi(&z1.y) - grad_psi(&z2.y);
            let ddy = &z1.y - &z2.y;
            psi_sc.record(p.m_y() * dy * dy, -gpsi.dot(&ddy), REL_SLACK, abs * dy);
            psi_sm.record(gpsi.norm(), (p.l_y() + p.l_xy() * p.l_xy() / p.m_x()) * dy, REL_SLACK, abs);

            let (sum, joint) = weighted_error(&z1, &zs)?;
            sand_lo.record(sum / core::f64::consts::SQRT_2, joint, REL_SLACK, 0.0);
            sand_hi.record(joint, sum, REL_SLACK, 0.0);

            let g = q.residual_norm(&z1);
            grad_lo.record(p.min_m() * joint, g, REL_SLACK, abs);
            grad_hi.record(g, 2.0 * p.l() * joint, REL_SLACK, abs);

            let l = p.l();
            gap.record(duality_gap(&q, &z1)?, l * l / p.min_m() * joint * joint, REL_SLACK, abs * abs);
        }
    }
    Ok(vec![lip_y, lip_x, phi_sc, phi_sm, psi_sc, psi_sm, sand_lo, sand_hi, grad_lo, grad_hi, gap])
}

/// Norm in which splitting errors and iteration matrices are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// Plain `‖·‖₂`.
    Euclidean,
    /// `‖N·‖₂` with `N = ηP^{1/2} + P^{-1/2}S`, in which the splitting
    /// contracts.
    Splitting,
}

/// Dense spectral checks of the splitting at `n, m <= 8`, for `k = 2, 3`,
/// with step ratios measured in the splitting norm.
pub fn hss_spectral_suite(seed: u64, instances: usize) -> Result<Vec<CheckResult>> {
    hss_spectral_checks(seed, instances, ErrorNorm::Splitting)
}

/// [`hss_spectral_suite`] with a choice of norm for the iteration matrix
/// bound and the step ratios. The Euclidean variants do not hold in
/// general; see `rhss::tests::iteration_matrix_norms`.
pub fn hss_spectral_checks(seed: u64, instances: usize, norm: ErrorNorm) -> Result<Vec<CheckResult>> {
    let mut s = Sampler::new(seed);
    let mut lemma1 = CheckResult::new(match norm {
        ErrorNorm::Splitting => "|N M(eta) N^-1|_2 <= max |(l - eta)/(l + eta)| over sp(P^-1 G)",
        ErrorNorm::Euclidean => "|M(eta)|_2 <= max |(l - eta)/(l + eta)| over sp(P^-1 G)",
    });
    let mut radius = CheckResult::new("rho(M(eta)) <= max |(l - eta)/(l + eta)| over sp(P^-1 G)");
    let mut below_one = CheckResult::new("max |(l - eta)/(l + eta)| <= 1 - (m_y/L_xy)^(1/k)/2");
    let mut sv_lo = CheckResult::new("m_x <= smallest singular value of J");
    let mut sv_hi = CheckResult::new("largest singular value of J <= L_xy + L_x");
    let mut cond = CheckResult::new("cond(eta P + G) <= min(3 kappa_x (m_y/L_xy)^(1/k), kappa_x)");
    let mut sub_lo = CheckResult::new("eta alpha <= eigenvalues of eta(alpha I + beta A), eta <= eigenvalues of eta(I + beta C)");
    let mut sub_hi = CheckResult::new("eigenvalues of both subproblem blocks <= 2 eta beta L_x");
    let mut step = CheckResult::new(match norm {
        ErrorNorm::Splitting => "exact splitting step ratio of |N(z - z*)| <= 1 - (m_y/L_xy)^(1/k)/2",
        ErrorNorm::Euclidean => "exact splitting step ratio of |z - z*| <= 1 - (m_y/L_xy)^(1/k)/2",
    });

    for _ in 0..instances {
        let (q, p) = normalized_instance(&mut s, 8, 1e3)?;
        let zs = direct_saddle(&q)?;
        let j = q.j_matrix();
        let svd = j.clone().svd(false, false);
        let smin = svd.singular_values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
        sv_lo.record(p.m_x(), smin, 0.0, 1e-9);
        sv_hi.record(smax, p.l_xy() + p.l_x(), 0.0, 1e-9);
        for k in [2u32, 3] {
            let ops = HssOperators::new(&q, &p, k)?;
            let bound = ops.lemma1_bound();
            let rate = contraction_factor(&p, k);
            let matrix = match norm {
                ErrorNorm::Splitting => ops.normalized_iteration_matrix()?,
                ErrorNorm::Euclidean => ops.iteration_matrix()?,
            };
            lemma1.record(linalg::spectral_norm(&matrix), bound, 0.0, 1e-10);
            radius.record(linalg::spectral_radius(&ops.iteration_matrix()?), bound, 0.0, 1e-10);
            below_one.record(bound, rate, 0.0, 1e-12);

            let pg = ops.p_matrix() * ops.eta + ops.g_matrix();
            let (lo, hi) = linalg::sym_eig_range(&pg);
            let kx = p.kappa_x();
            let limit = (3.0 * kx * Float::powf(p.m_y() / p.l_xy(), 1.0 / k as f64)).min(kx);
            cond.record(hi / lo, limit, REL_SLACK, 0.0);

            let sub = ops.subproblem()?;
            let (alo, ahi) = linalg::sym_eig_range(sub.a());
            let (clo, chi) = linalg::sym_eig_range(sub.c());
            sub_lo.record(ops.eta * ops.alpha, alo, REL_SLACK, 0.0);
            sub_lo.record(ops.eta, clo, REL_SLACK, 0.0);
            let top = 2.0 * ops.eta * ops.beta * p.l_x();
            sub_hi.record(ahi, top, REL_SLACK, 0.0);
            sub_hi.record(chi, top, REL_SLACK, 0.0);

            let nm = splitting_or_identity(ops.contraction_norm_matrix(), norm);
            let err = |z: &JointPoint| (&nm * (z.stacked() - zs.stacked())).norm();
            let mut z = s.point_near(&zs);
            for _ in 0..5 {
                let next = hss_exact_step(&ops, &z)?;
                let before = err(&z);
                if z.distance(&zs) < 1e-9 * zs.norm().max(1.0) {
                    break;
                }
                step.record(err(&next) / before, rate, 0.0, 1e-10);
                z = next;
            }
        }
    }
    Ok(vec![lemma1, radius, below_one, sv_lo, sv_hi, cond, sub_lo, sub_hi, step])
}

fn splitting_or_identity(n: DMatrix<f64>, norm: ErrorNorm) -> DMatrix<f64> {
    match norm {
        ErrorNorm::Splitting => n,
        ErrorNorm::Euclidean => DMatrix::identity(n.nrows(), n.ncols()),
    }
}

/// Theoretical-mode recursive solves at `n, m <= 16`: per-iteration
/// contraction in the splitting norm and the residual certificate.
pub fn rhss_contraction_suite(seed: u64, instances: usize) -> Result<Vec<CheckResult>> {
    let [_, splitting, certificate] = rhss_contraction_checks(seed, instances)?;
    Ok(vec![splitting, certificate])
}

/// Outer ratios of the same solves measured in both norms (Euclidean
/// first, then splitting), plus the residual certificate.
pub fn rhss_contraction_checks(seed: u64, instances: usize) -> Result<[CheckResult; 3]> {
    let mut s = Sampler::new(seed);
    let mut euclidean = CheckResult::new("outer ratio of |z - z*| <= 1 - (m_y/L_xy)^(1/k)/4");
    let mut splitting = CheckResult::new("outer ratio of |N(z - z*)| <= 1 - (m_y/L_xy)^(1/k)/4");
    let mut certificate = CheckResult::new("|z_T - z*| <= eps |z_0 - z*| when the residual rule fires");
    for i in 0..instances {
        let (q, p) = normalized_instance(&mut s, 16, 100.0)?;
        let zs = direct_saddle(&q)?;
        let z0 = s.point_near(&zs);
        let k = 2 + (i % 2) as u32;
        let eps = 1e-6;
        let mut cfg = RhssConfig::new(k, eps, SolveMode::Theoretical);
        cfg.record_trace = true;
        let r = rhss_solve(&q, &p, &z0, &cfg)?;
        let rate = inexact_contraction_factor(&p, k);
        let nm = HssOperators::new(&q, &p, k)?.contraction_norm_matrix();
        let err = |z: &JointPoint| (&nm * (z.stacked() - zs.stacked())).norm();
        for w in r.trace.windows(2) {
            // Stop measuring once the error sits at the rounding floor of
            // the direct solve.
            if w[0].distance(&zs) < 1e-11 * zs.norm().max(1.0) {
                break;
            }
            splitting.record(err(&w[1]) / err(&w[0]), rate, 0.0, 0.0);
            euclidean.record(w[1].distance(&zs) / w[0].distance(&zs), rate, 0.0, 0.0);
        }
        if r.termination == crate::Termination::ToleranceMet {
            certificate.record(r.final_point.distance(&zs), eps * z0.distance(&zs), 0.0, 0.0);
        } else {
            certificate.record(f64::INFINITY, 0.0, 0.0, 0.0);
        }
    }
    Ok([euclidean, splitting, certificate])
}

/// Final summed-error ratio and per-round weighted contraction of ABR on
/// weakly coupled instances, for `ε = 1e-2` and `1e-4`.
pub fn abr_suite(seed: u64, instances: usize) -> Result<Vec<CheckResult>> {
    let mut s = Sampler::new(seed);
    let mut final_ratio = CheckResult::new("ABR summed error ratio <= eps");
    let mut rounds = CheckResult::new("per-round weighted contraction <= 0.55");
    for _ in 0..instances {
        let m_x = s.log_uniform(0.2, 2.0);
        let m_y = s.log_uniform(0.2, 2.0);
        let l_x = m_x * s.log_uniform(1.0, 300.0);
        let l_y = m_y * s.log_uniform(1.0, 300.0);
        let l_xy = 0.5 * Float::sqrt(m_x * m_y) * s.uniform(0.0, 1.0);
        let p = SmoothnessParams::new(m_x, m_y, l_x, l_xy, l_y)?;
        let (n, m) = (s.int(2, 20), s.int(2, 20));
        let q = make_quadratic(&InstanceSpec::new(n, m, p, s.seed()))?;
        let zs = direct_saddle(&q)?;
        let z0 = s.point_near(&zs);
        for eps in [1e-2, 1e-4] {
            let o = CountingOracle::new(&q);
            let mut cfg = AbrConfig::new(eps, p);
            cfg.record_trace = true;
            let r = abr_solve(&o, &z0, &cfg)?;
            let (s0, _) = weighted_error(&z0, &zs)?;
            let (sf, _) = weighted_error(&r.final_point, &zs)?;
            final_ratio.record(sf / s0, eps, 0.0, 0.0);
            for ratio in abr_round_contraction(&r.trace, &zs, &p) {
                rounds.record(ratio, 0.55, 0.0, 0.0);
            }
        }
    }
    Ok(vec![final_ratio, rounds])
}

/// Iteration counts of CG on SPD systems with prescribed condition numbers.
pub fn cg_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut s = Sampler::new(seed);
    let mut iters = CheckResult::new("CG iterations <= ceil(sqrt(kappa) ln(2 sqrt(kappa)/eps))");
    let mut residual = CheckResult::new("CG residual <= eps |b - A x0|");
    let eps = 1e-8;
    for kappa in [1e2, 1e4] {
        for &dim in &[10usize, 40, 100] {
            for _ in 0..3 {
                let a = spd_with_condition(&mut s, dim, kappa)?;
                let b = s.vector(dim);
                let mut x = vec![0.0; dim];
                let out = cg(|v, o| linalg::gemv(&a, v, o), b.as_slice(), &mut x, eps, &CgOptions::default())?;
                iters.record(out.iterations as f64, cg_iteration_bound(kappa, eps) as f64, 0.0, 0.0);
                residual.record(out.residual, eps * b.norm(), 0.0, 0.0);
            }
        }
    }
    Ok(vec![iters, residual])
}

fn spd_with_condition(s: &mut Sampler, dim: usize, kappa: f64) -> Result<DMatrix<f64>> {
    let p = SmoothnessParams::new(1.0, 1.0, kappa, 0.0, 1.0)?;
    let spec = InstanceSpec::new(dim, 1, p, s.seed()).with_shape(crate::SpectrumShape::LogUniform);
    Ok(make_quadratic(&spec)?.a().clone())
}

/// Squared-distance guarantee of AGD on strongly convex quadratics.
pub fn agd_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut s = Sampler::new(seed);
    let mut bound = CheckResult::new("|x_T - x*|^2 <= (kappa + 1)(1 - 1/sqrt(kappa))^T |x_0 - x*|^2");
    for kappa in [10.0, 1e2, 1e3] {
        for &dim in &[5usize, 20, 50] {
            let a = spd_with_condition(&mut s, dim, kappa)?;
            let xs = s.vector(dim);
            let mut c = vec![0.0; dim];
            linalg::gemv(&a, xs.as_slice(), &mut c);
            let x0 = s.vector(dim) * 10.0;
            let e0 = (&x0 - &xs).norm_squared();
            let steps = Float::ceil(4.0 * Float::sqrt(kappa) * Float::ln(kappa * 1e6)) as u64;
            for t in (0..=steps).step_by((steps / 25).max(1) as usize) {
                let cfg = AgdConfig::new(kappa, 1.0, t)?;
                let x = agd(
                    |v: &[f64], g: &mut [f64]| {
                        linalg::gemv(&a, v, g);
                        linalg::axpy(-1.0, &c, g);
                    },
                    x0.as_slice(),
                    &cfg,
                );
                let et = linalg::dist(&x, xs.as_slice()).powi(2);
                bound.record(et, cfg.contraction_bound() * e0, 0.0, 1e-9);
            }
        }
    }
    Ok(vec![bound])
}

/// One-line summary of a check for logs.
pub fn describe(c: &CheckResult) -> String {
    format!(
        "{} [{}] samples={} failures={} worst_ratio={:.6e}",
        c.name,
        if c.passed() { "pass" } else { "FAIL" },
        c.samples,
        c.failures,
        c.worst_ratio
    )
}
