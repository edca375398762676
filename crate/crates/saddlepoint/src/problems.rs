//! Test instances with exact ground truth.
//!
//! Quadratic saddle problems
//! `f(x, y) = ½xᵀAx + xᵀBy − ½yᵀCy + uᵀx + vᵀy`
//! are built with prescribed spectral extremes so that declared smoothness
//! constants are tight. Their saddle point solves `Jz = b` with
//! `J = [[A, B], [−Bᵀ, C]]` and `b = [−u; v]`.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::base::{GradKind, JointPoint, Result, SaddleFunction, SmoothnessParams, SolverError};
use crate::linalg;

/// How interior eigenvalues and singular values are placed. The extremes
/// are always exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumShape {
    /// Deterministic log-uniform grid between the extremes.
    #[default]
    Endpoints,
    /// Interior values drawn log-uniformly at random.
    LogUniform,
    /// Interior values clustered near both extremes.
    Clustered,
}

/// Everything needed to rebuild an instance bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    pub params: SmoothnessParams,
    pub seed: u64,
    pub shape: SpectrumShape,
}

impl InstanceSpec {
    pub fn new(n: usize, m: usize, params: SmoothnessParams, seed: u64) -> Self {
        Self { n, m, params, seed, shape: SpectrumShape::Endpoints }
    }

    pub fn with_shape(mut self, shape: SpectrumShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(SolverError::InvalidParams("dimensions must be at least 1"));
        }
        let p = &self.params;
        if self.n == 1 && p.m_x() != p.l_x() {
            return Err(SolverError::InvalidParams("n = 1 forces m_x = L_x"));
        }
        if self.m == 1 && p.m_y() != p.l_y() {
            return Err(SolverError::InvalidParams("m = 1 forces m_y = L_y"));
        }
        Ok(())
    }
}

/// A quadratic saddle problem with symmetric `A`, `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSaddle {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    u: DVector<f64>,
    v: DVector<f64>,
}

impl QuadraticSaddle {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        u: DVector<f64>,
        v: DVector<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = c.nrows();
        if n == 0 || m == 0 {
            return Err(SolverError::InvalidParams("dimensions must be at least 1"));
        }
        if a.ncols() != n {
            return Err(SolverError::DimensionMismatch { expected: n, got: a.ncols() });
        }
        if c.ncols() != m {
            return Err(SolverError::DimensionMismatch { expected: m, got: c.ncols() });
        }
        if b.nrows() != n {
            return Err(SolverError::DimensionMismatch { expected: n, got: b.nrows() });
        }
        if b.ncols() != m {
            return Err(SolverError::DimensionMismatch { expected: m, got: b.ncols() });
        }
        if u.len() != n {
            return Err(SolverError::DimensionMismatch { expected: n, got: u.len() });
        }
        if v.len() != m {
            return Err(SolverError::DimensionMismatch { expected: m, got: v.len() });
        }
        let finite = |s: &[f64]| s.iter().all(|x| x.is_finite());
        if !(finite(a.as_slice())
            && finite(b.as_slice())
            && finite(c.as_slice())
            && finite(u.as_slice())
            && finite(v.as_slice()))
        {
            return Err(SolverError::NonFinite);
        }
        if !is_symmetric(&a) || !is_symmetric(&c) {
            return Err(SolverError::InvalidParams("A and C must be symmetric"));
        }
        Ok(Self { a, b, c, u, v })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }
    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    /// Replaces the linear terms.
    pub fn set_linear(&mut self, u: &[f64], v: &[f64]) {
        self.u.as_mut_slice().copy_from_slice(u);
        self.v.as_mut_slice().copy_from_slice(v);
    }

    /// `J = [[A, B], [−Bᵀ, C]]`
    pub fn j_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut j = DMatrix::zeros(n + m, n + m);
        j.view_mut((0, 0), (n, n)).copy_from(&self.a);
        j.view_mut((0, n), (n, m)).copy_from(&self.b);
        j.view_mut((n, 0), (m, n)).copy_from(&(-self.b.transpose()));
        j.view_mut((n, n), (m, m)).copy_from(&self.c);
        j
    }

    /// `b = [−u; v]`
    pub fn rhs(&self) -> DVector<f64> {
        let (n, m) = (self.n(), self.m());
        DVector::from_fn(n + m, |i, _| if i < n { -self.u[i] } else { self.v[i - n] })
    }

    /// `‖Jz − b‖`, which equals `‖∇f(z)‖`.
    pub fn residual_norm(&self, z: &JointPoint) -> f64 {
        let (n, m) = (self.n(), self.m());
        let mut gx = alloc::vec![0.0; n];
        let mut gy = alloc::vec![0.0; m];
        self.grad_into(z.x.as_slice(), z.y.as_slice(), &mut gx, &mut gy);
        linalg::norm2(&gx, &gy)
    }

    /// Tight constants measured by dense eigen/singular decompositions.
    pub fn measured_params(&self) -> Result<SmoothnessParams> {
        let (m_x, l_x) = linalg::sym_eig_range(&self.a);
        let (m_y, l_y) = linalg::sym_eig_range(&self.c);
        let l_xy = linalg::spectral_norm(&self.b);
        SmoothnessParams::new(m_x, m_y, l_x, l_xy, l_y)
    }

    /// Checks that the spectral extremes lie within `rel_tol` of `params`.
    pub fn verify(&self, params: &SmoothnessParams, rel_tol: f64) -> Result<()> {
        let got = self.measured_params()?;
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * b.abs().max(f64::MIN_POSITIVE);
        let ok = close(got.m_x(), params.m_x())
            && close(got.l_x(), params.l_x())
            && close(got.m_y(), params.m_y())
            && close(got.l_y(), params.l_y())
            && (close(got.l_xy(), params.l_xy()) || (params.l_xy() == 0.0 && got.l_xy() == 0.0));
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidParams("instance spectrum does not match declared parameters"))
        }
    }

    /// `h(p, q) = −f(q, p)` as a quadratic: `A'' = C`, `B'' = −Bᵀ`,
    /// `C'' = A`, `u'' = −v`, `v'' = −u`.
    pub fn flipped(&self) -> QuadraticSaddle {
        QuadraticSaddle {
            a: self.c.clone(),
            b: -self.b.transpose(),
            c: self.a.clone(),
            u: -&self.v,
            v: -&self.u,
        }
    }

    /// `g(x, y) = f(a·x, b·y)` as a quadratic.
    pub fn rescaled(&self, a: f64, b: f64) -> QuadraticSaddle {
        QuadraticSaddle {
            a: &self.a * (a * a),
            b: &self.b * (a * b),
            c: &self.c * (b * b),
            u: &self.u * a,
            v: &self.v * b,
        }
    }
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

impl SaddleFunction for QuadraticSaddle {
    fn dims(&self) -> (usize, usize) {
        (self.n(), self.m())
    }

    fn grad_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.grad_x_into(x, y, gx);
        self.grad_y_into(x, y, gy);
    }

    fn grad_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]) {
        linalg::gemv(&self.a, x, gx);
        linalg::gemv_acc(&self.b, y, gx);
        for (g, ui) in gx.iter_mut().zip(self.u.iter()) {
            *g += ui;
        }
    }

    fn grad_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]) {
        linalg::gemv_t(&self.b, x, gy);
        linalg::gemv_sub(&self.c, y, gy);
        for (g, vi) in gy.iter_mut().zip(self.v.iter()) {
            *g += vi;
        }
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let (n, m) = (self.n(), self.m());
        let mut ax = alloc::vec![0.0; n];
        linalg::gemv(&self.a, x, &mut ax);
        let mut by = alloc::vec![0.0; n];
        linalg::gemv(&self.b, y, &mut by);
        let mut cy = alloc::vec![0.0; m];
        linalg::gemv(&self.c, y, &mut cy);
        0.5 * linalg::dot(x, &ax) + linalg::dot(x, &by) - 0.5 * linalg::dot(y, &cy)
            + linalg::dot(self.u.as_slice(), x)
            + linalg::dot(self.v.as_slice(), y)
    }

    fn matvec_cost(&self, kind: GradKind) -> u64 {
        match kind {
            GradKind::Full => 4,
            GradKind::X | GradKind::Y => 2,
        }
    }
}

fn gaussian_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    out
}

/// Orthogonal factor of a Gaussian matrix, with the `R` diagonal made
/// positive so the factor is a deterministic function of the draw.
fn random_orthogonal(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

fn unit_draws(rng: &mut ChaCha20Rng, k: usize) -> Vec<f64> {
    let dist = Uniform::new(0.0f64, 1.0).expect("valid range");
    (0..k).map(|_| dist.sample(rng)).collect()
}

/// `count` values in `[lo, hi]` with `lo` and `hi` both present (for
/// `count >= 2`), sorted ascending.
fn spectrum(lo: f64, hi: f64, count: usize, shape: SpectrumShape, draws: &[f64]) -> Vec<f64> {
    if count == 1 {
        return alloc::vec![hi];
    }
    let ratio = hi / lo;
    let mut vals = Vec::with_capacity(count);
    vals.push(lo);
    for i in 1..count - 1 {
        let t = match shape {
            SpectrumShape::Endpoints => i as f64 / (count - 1) as f64,
            SpectrumShape::LogUniform => draws[i - 1],
            SpectrumShape::Clustered => {
                if i % 2 == 1 {
                    0.05 * draws[i - 1]
                } else {
                    1.0 - 0.05 * draws[i - 1]
                }
            }
        };
        vals.push(lo * Float::powf(ratio, t));
    }
    vals.push(hi);
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite spectrum"));
    vals
}

fn symmetric_from(q: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let n = d.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * d[j]);
    let s = scaled * q.transpose();
    (&s + s.transpose()) * 0.5
}

/// Builds a quadratic instance whose spectral extremes equal the declared
/// parameters: `λ(A) ⊂ [m_x, L_x]`, `λ(C) ⊂ [m_y, L_y]`, `σ_max(B) = L_xy`,
/// each extreme attained.
///
/// Interior singular values of `B` lie in `[L_xy/10, L_xy]`. The linear
/// terms are standard Gaussian. The random stream is ChaCha20 seeded with
/// `spec.seed`.
pub fn make_quadratic(spec: &InstanceSpec) -> Result<QuadraticSaddle> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let p = &spec.params;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let qa = random_orthogonal(&mut rng, n);
    let qc = random_orthogonal(&mut rng, m);
    let ub = random_orthogonal(&mut rng, n);
    let vb = random_orthogonal(&mut rng, m);
    let r = n.min(m);

    let da = unit_draws(&mut rng, n.saturating_sub(2));
    let dc = unit_draws(&mut rng, m.saturating_sub(2));
    let db = unit_draws(&mut rng, r.saturating_sub(1));

    let ea = spectrum(p.m_x(), p.l_x(), n, spec.shape, &da);
    let ec = spectrum(p.m_y(), p.l_y(), m, spec.shape, &dc);
    let a = symmetric_from(&qa, &ea);
    let c = symmetric_from(&qc, &ec);

    let mut b = DMatrix::zeros(n, m);
    if p.l_xy() > 0.0 {
        let mut sv = alloc::vec![p.l_xy(); r];
        for (i, s) in sv.iter_mut().enumerate().skip(1) {
            let t = match spec.shape {
                SpectrumShape::Endpoints => i as f64 / r.max(2).saturating_sub(1) as f64,
                SpectrumShape::LogUniform => db[i - 1],
                SpectrumShape::Clustered => {
                    if i % 2 == 1 {
                        0.05 * db[i - 1]
                    } else {
                        1.0 - 0.05 * db[i - 1]
                    }
                }
            };
            *s = p.l_xy() * Float::powf(10.0, -t);
        }
        for (i, s) in sv.iter().enumerate() {
            b += ub.column(i) * vb.column(i).transpose() * *s;
        }
    }

    let u = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let v = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    let q = QuadraticSaddle::new(a, b, c, u, v)?;
    q.verify(p, 1e-9)?;
    Ok(q)
}

/// A `B = 0` instance with explicit eigenvalues for `A` and `C`.
pub fn separable_instance(a_spectrum: &[f64], c_spectrum: &[f64], seed: u64) -> Result<QuadraticSaddle> {
    let (n, m) = (a_spectrum.len(), c_spectrum.len());
    if n == 0 || m == 0 {
        return Err(SolverError::InvalidParams("dimensions must be at least 1"));
    }
    if a_spectrum.iter().chain(c_spectrum).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(SolverError::InvalidParams("eigenvalues must be positive and finite"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let qa = random_orthogonal(&mut rng, n);
    let qc = random_orthogonal(&mut rng, m);
    let a = symmetric_from(&qa, a_spectrum);
    let c = symmetric_from(&qc, c_spectrum);
    let u = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let v = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    QuadraticSaddle::new(a, DMatrix::zeros(n, m), c, u, v)
}

/// The saddle point, from a dense LU solve of `Jz = b`.
pub fn direct_saddle(q: &QuadraticSaddle) -> Result<JointPoint> {
    let j = q.j_matrix();
    let z = j.lu().solve(&q.rhs()).ok_or(SolverError::Singular)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::Singular);
    }
    Ok(JointPoint::from_stacked(z.as_slice(), q.n()))
}

/// Exact best-response maps of a quadratic.
pub struct BestResponse<'a> {
    q: &'a QuadraticSaddle,
    chol_a: Cholesky<f64, Dyn>,
    chol_c: Cholesky<f64, Dyn>,
}

pub fn best_response_maps(q: &QuadraticSaddle) -> Result<BestResponse<'_>> {
    let chol_a = Cholesky::new(q.a.clone()).ok_or(SolverError::Singular)?;
    let chol_c = Cholesky::new(q.c.clone()).ok_or(SolverError::Singular)?;
    Ok(BestResponse { q, chol_a, chol_c })
}

impl BestResponse<'_> {
    /// `argmin_x f(x, y) = −A⁻¹(By + u)`
    pub fn x_star_of_y(&self, y: &DVector<f64>) -> DVector<f64> {
        -self.chol_a.solve(&(&self.q.b * y + &self.q.u))
    }

    /// `argmax_y f(x, y) = C⁻¹(Bᵀx + v)`
    pub fn y_star_of_x(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chol_c.solve(&(self.q.b.tr_mul(x) + &self.q.v))
    }
}

/// Duality gap `max_y f(x, y) − min_x f(x', y)` at `z = (x, y')`, clamped at 0.
pub fn duality_gap(q: &QuadraticSaddle, z: &JointPoint) -> Result<f64> {
    if z.dims() != (q.n(), q.m()) {
        return Err(SolverError::DimensionMismatch { expected: q.n(), got: z.x.len() });
    }
    let br = best_response_maps(q)?;
    let ys = br.y_star_of_x(&z.x);
    let xs = br.x_star_of_y(&z.y);
    let phi = q.value(z.x.as_slice(), ys.as_slice());
    let psi = q.value(xs.as_slice(), z.y.as_slice());
    Ok((phi - psi).max(0.0))
}

/// `f + Σ ρ·ln(1 + x_i²)`: a smooth non-quadratic perturbation.
///
/// The perturbation's curvature lies in `[−ρ/4, 2ρ]`; the declared constants
/// subtract and add `2ρ` on the `x` block.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPerturbed {
    pub quad: QuadraticSaddle,
    pub rho: f64,
}

impl SaddleFunction for LogPerturbed {
    fn dims(&self) -> (usize, usize) {
        self.quad.dims()
    }
    fn grad_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.grad_x_into(x, y, gx);
        self.quad.grad_y_into(x, y, gy);
    }
    fn grad_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]) {
        self.quad.grad_x_into(x, y, gx);
        for (g, xi) in gx.iter_mut().zip(x) {
            *g += 2.0 * self.rho * xi / (1.0 + xi * xi);
        }
    }
    fn grad_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]) {
        self.quad.grad_y_into(x, y, gy);
    }
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.quad.value(x, y) + x.iter().map(|xi| self.rho * Float::ln_1p(xi * xi)).sum::<f64>()
    }
    fn matvec_cost(&self, kind: GradKind) -> u64 {
        self.quad.matvec_cost(kind)
    }
}

/// Builds the perturbed family and its declared parameters.
pub fn make_log_perturbed(spec: &InstanceSpec, rho: f64) -> Result<(LogPerturbed, SmoothnessParams)> {
    let p = spec.params;
    if !(rho > 0.0) || 2.0 * rho >= p.m_x() {
        return Err(SolverError::InvalidParams("need 0 < 2·rho < m_x"));
    }
    let quad = make_quadratic(spec)?;
    let declared =
        SmoothnessParams::new(p.m_x() - 2.0 * rho, p.m_y(), p.l_x() + 2.0 * rho, p.l_xy(), p.l_y())?;
    Ok((LogPerturbed { quad, rho }, declared))
}
