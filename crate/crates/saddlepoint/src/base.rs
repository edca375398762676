//! Shared types, the gradient-oracle contract and oracle wrappers.
//!
//! Every solver sees the objective only through [`GradientOracle`]. The
//! evaluation counter lives in the root [`CountingOracle`]; wrappers
//! ([`ProxAugmentX`], [`ProxAugmentY`], [`FlipMinMax`], [`Rescaled`]) hold a
//! reference to their inner oracle and delegate exactly one inner evaluation
//! per outer evaluation, so the root counter is the single source of truth.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use nalgebra::DVector;
use num_traits::Float;

use crate::linalg;

/// Errors reported by solvers and constructors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),
    #[error("inner solver hit its iteration cap ({0})")]
    InnerIterationCap(&'static str),
    #[error("iterates diverged at iteration {iteration}")]
    Diverged { iteration: u64 },
    #[error("conjugate gradient breakdown: operator is not positive definite")]
    Breakdown,
    #[error("linear system is singular")]
    Singular,
    #[error("non-finite value encountered")]
    NonFinite,
}

pub type Result<T> = core::result::Result<T, SolverError>;

/// A point `z = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl JointPoint {
    /// Builds a point, rejecting empty blocks and non-finite entries.
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(SolverError::InvalidParams("both blocks need at least one entry"));
        }
        let p = Self { x, y };
        if !p.is_finite() {
            return Err(SolverError::NonFinite);
        }
        Ok(p)
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(x), DVector::from_column_slice(y))
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self { x: DVector::zeros(n), y: DVector::zeros(m) }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }

    /// Joint Euclidean norm `‖[x; y]‖`.
    pub fn norm(&self) -> f64 {
        linalg::norm2(self.x.as_slice(), self.y.as_slice())
    }

    /// `‖self − other‖`; panics on mismatched dimensions.
    pub fn distance(&self, other: &JointPoint) -> f64 {
        assert_eq!(self.dims(), other.dims(), "dimension mismatch");
        let dx = linalg::dist(self.x.as_slice(), other.x.as_slice());
        let dy = linalg::dist(self.y.as_slice(), other.y.as_slice());
        Float::sqrt(dx * dx + dy * dy)
    }

    /// Stacks the blocks into `[x; y]`.
    pub fn stacked(&self) -> DVector<f64> {
        let (n, m) = self.dims();
        DVector::from_fn(n + m, |i, _| if i < n { self.x[i] } else { self.y[i - n] })
    }

    /// Splits `[x; y]` after the first `n` entries.
    pub fn from_stacked(z: &[f64], n: usize) -> Self {
        Self {
            x: DVector::from_column_slice(&z[..n]),
            y: DVector::from_column_slice(&z[n..]),
        }
    }

    /// The point with blocks exchanged, `(y, x)`.
    pub fn swapped(&self) -> Self {
        Self { x: self.y.clone(), y: self.x.clone() }
    }
}

/// Summed and joint error of `z` against `z_star`:
/// `(‖x − x*‖ + ‖y − y*‖, ‖z − z*‖)`.
pub fn weighted_error(z: &JointPoint, z_star: &JointPoint) -> Result<(f64, f64)> {
    let (n, m) = z.dims();
    let (ns, ms) = z_star.dims();
    if n != ns {
        return Err(SolverError::DimensionMismatch { expected: n, got: ns });
    }
    if m != ms {
        return Err(SolverError::DimensionMismatch { expected: m, got: ms });
    }
    let ex = linalg::dist(z.x.as_slice(), z_star.x.as_slice());
    let ey = linalg::dist(z.y.as_slice(), z_star.y.as_slice());
    Ok((ex + ey, Float::sqrt(ex * ex + ey * ey)))
}

/// Declared constants `(m_x, m_y, L_x, L_xy, L_y)` of the function class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessParams {
    m_x: f64,
    m_y: f64,
    l_x: f64,
    l_xy: f64,
    l_y: f64,
}

impl SmoothnessParams {
    pub fn new(m_x: f64, m_y: f64, l_x: f64, l_xy: f64, l_y: f64) -> Result<Self> {
        let all = [m_x, m_y, l_x, l_xy, l_y];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidParams("parameters must be finite"));
        }
        if !(m_x > 0.0 && m_y > 0.0) {
            return Err(SolverError::InvalidParams("m_x and m_y must be positive"));
        }
        if l_xy < 0.0 {
            return Err(SolverError::InvalidParams("L_xy must be nonnegative"));
        }
        if m_x > l_x {
            return Err(SolverError::InvalidParams("need m_x <= L_x"));
        }
        if m_y > l_y {
            return Err(SolverError::InvalidParams("need m_y <= L_y"));
        }
        Ok(Self { m_x, m_y, l_x, l_xy, l_y })
    }

    pub fn m_x(&self) -> f64 {
        self.m_x
    }
    pub fn m_y(&self) -> f64 {
        self.m_y
    }
    pub fn l_x(&self) -> f64 {
        self.l_x
    }
    pub fn l_xy(&self) -> f64 {
        self.l_xy
    }
    pub fn l_y(&self) -> f64 {
        self.l_y
    }

    /// `L = max{L_x, L_xy, L_y}`
    pub fn l(&self) -> f64 {
        self.l_x.max(self.l_xy).max(self.l_y)
    }
    pub fn kappa_x(&self) -> f64 {
        self.l_x / self.m_x
    }
    pub fn kappa_y(&self) -> f64 {
        self.l_y / self.m_y
    }
    pub fn min_m(&self) -> f64 {
        self.m_x.min(self.m_y)
    }
    pub fn max_m(&self) -> f64 {
        self.m_x.max(self.m_y)
    }

    /// Parameters of `h(y, x) = −f(x, y)`: the blocks trade places.
    pub fn swapped(&self) -> Self {
        Self { m_x: self.m_y, m_y: self.m_x, l_x: self.l_y, l_xy: self.l_xy, l_y: self.l_x }
    }

    /// Whether Alternating Best Response's coupling hypothesis
    /// `L_xy <= sqrt(m_x m_y) / 2` holds (with a relative rounding allowance).
    pub fn weakly_coupled(&self) -> bool {
        self.l_xy <= 0.5 * Float::sqrt(self.m_x * self.m_y) * (1.0 + 1e-12)
    }
}

/// Constants policy for the nested solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// All precision constants and iteration counts follow the analysis.
    Theoretical,
    /// Inner precisions are tunable and the outer loop stops on a
    /// gradient-norm certificate.
    #[default]
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ToleranceMet,
    IterationCap,
    /// An iteration left the whole iterate state bitwise unchanged, so
    /// every later one would too. The target was not certified.
    Stalled,
    PreconditionViolated,
}

/// Per-run record returned by every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub outer_iterations: u64,
    pub gradient_evals: u64,
    /// Products with `A`, `B`, `Bᵀ` or `C`, one each.
    pub matvec_products: u64,
    pub final_point: JointPoint,
    /// `(evaluation count, ‖∇f‖)` pairs; for quadratics `‖∇f‖ = ‖Jz − b‖`.
    pub residual_history: Vec<(u64, f64)>,
    pub termination: Termination,
    /// Outer iterates including the start point, when requested.
    pub trace: Vec<JointPoint>,
}

/// Which part of the gradient an evaluation produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradKind {
    Full,
    X,
    Y,
}

/// A differentiable objective. Implementations are the leaves that a
/// [`CountingOracle`] wraps.
pub trait SaddleFunction {
    fn dims(&self) -> (usize, usize);
    fn grad_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]);

    fn grad_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]) {
        let mut gy = vec![0.0; y.len()];
        self.grad_into(x, y, gx, &mut gy);
    }

    fn grad_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]) {
        let mut gx = vec![0.0; x.len()];
        self.grad_into(x, y, &mut gx, gy);
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64;

    /// Matrix-vector products charged for one evaluation of `kind`.
    fn matvec_cost(&self, _kind: GradKind) -> u64 {
        0
    }
}

impl<F: SaddleFunction + ?Sized> SaddleFunction for &F {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn grad_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        (**self).grad_into(x, y, gx, gy)
    }
    fn grad_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]) {
        (**self).grad_x_into(x, y, gx)
    }
    fn grad_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]) {
        (**self).grad_y_into(x, y, gy)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        (**self).value(x, y)
    }
    fn matvec_cost(&self, kind: GradKind) -> u64 {
        (**self).matvec_cost(kind)
    }
}

/// First-order access to an objective.
///
/// `eval_into`, `eval_x_into` and `eval_y_into` each count as one
/// gradient evaluation at the root. `peek_into` is uncounted and reserved
/// for instrumentation (residual histories), never for algorithmic use.
pub trait GradientOracle {
    fn dims(&self) -> (usize, usize);
    fn eval_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]);
    fn eval_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]);
    fn eval_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]);
    fn peek_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]);
    /// Root evaluation counter.
    fn evaluations(&self) -> u64;
    /// Root matrix-vector product counter.
    fn matvec_products(&self) -> u64;

    /// Counted evaluation returning `(∇_x f, ∇_y f)` as a point.
    fn eval(&self, z: &JointPoint) -> JointPoint {
        let (n, m) = self.dims();
        let mut g = JointPoint::zeros(n, m);
        self.eval_into(z.x.as_slice(), z.y.as_slice(), g.x.as_mut_slice(), g.y.as_mut_slice());
        g
    }

    /// Uncounted `‖∇f(z)‖`.
    fn peek_norm(&self, z: &JointPoint) -> f64 {
        let (n, m) = self.dims();
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; m];
        self.peek_into(z.x.as_slice(), z.y.as_slice(), &mut gx, &mut gy);
        linalg::norm2(&gx, &gy)
    }
}

/// Root oracle: evaluates a [`SaddleFunction`] and counts.
#[derive(Debug)]
pub struct CountingOracle<F> {
    f: F,
    evals: Cell<u64>,
    matvecs: Cell<u64>,
}

impl<F: SaddleFunction> CountingOracle<F> {
    pub fn new(f: F) -> Self {
        Self { f, evals: Cell::new(0), matvecs: Cell::new(0) }
    }

    pub fn function(&self) -> &F {
        &self.f
    }

    #[inline]
    fn charge(&self, kind: GradKind) {
        self.evals.set(self.evals.get() + 1);
        self.matvecs.set(self.matvecs.get() + self.f.matvec_cost(kind));
    }
}

impl<F: SaddleFunction> GradientOracle for CountingOracle<F> {
    fn dims(&self) -> (usize, usize) {
        self.f.dims()
    }
    fn eval_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.charge(GradKind::Full);
        self.f.grad_into(x, y, gx, gy);
    }
    fn eval_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]) {
        self.charge(GradKind::X);
        self.f.grad_x_into(x, y, gx);
    }
    fn eval_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]) {
        self.charge(GradKind::Y);
        self.f.grad_y_into(x, y, gy);
    }
    fn peek_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.f.grad_into(x, y, gx, gy);
    }
    fn evaluations(&self) -> u64 {
        self.evals.get()
    }
    fn matvec_products(&self) -> u64 {
        self.matvecs.get()
    }
}

/// `f(x, y) + β‖x − x̂‖²`
pub struct ProxAugmentX<'a, O: ?Sized> {
    inner: &'a O,
    beta: f64,
    x_hat: Vec<f64>,
}

/// Wraps `oracle` as `f + β‖x − x̂‖²`.
pub fn prox_augment_x<'a, O: GradientOracle + ?Sized>(
    oracle: &'a O,
    beta: f64,
    x_hat: &[f64],
) -> Result<ProxAugmentX<'a, O>> {
    let (n, _) = oracle.dims();
    if x_hat.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, got: x_hat.len() });
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(SolverError::InvalidParams("beta must be finite and nonnegative"));
    }
    Ok(ProxAugmentX { inner: oracle, beta, x_hat: x_hat.to_vec() })
}

impl<O: ?Sized> ProxAugmentX<'_, O> {
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn center(&self) -> &[f64] {
        &self.x_hat
    }

    #[inline]
    fn add_prox(&self, x: &[f64], gx: &mut [f64]) {
        let two_beta = 2.0 * self.beta;
        for ((g, xi), ci) in gx.iter_mut().zip(x).zip(&self.x_hat) {
            *g += two_beta * (xi - ci);
        }
    }
}

impl<O: GradientOracle + ?Sized> GradientOracle for ProxAugmentX<'_, O> {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }
    fn eval_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.inner.eval_into(x, y, gx, gy);
        self.add_prox(x, gx);
    }
    fn eval_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]) {
        self.inner.eval_x_into(x, y, gx);
        self.add_prox(x, gx);
    }
    fn eval_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]) {
        self.inner.eval_y_into(x, y, gy);
    }
    fn peek_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.inner.peek_into(x, y, gx, gy);
        self.add_prox(x, gx);
    }
    fn evaluations(&self) -> u64 {
        self.inner.evaluations()
    }
    fn matvec_products(&self) -> u64 {
        self.inner.matvec_products()
    }
}

/// `f(x, y) − β‖y − ŷ‖²`
pub struct ProxAugmentY<'a, O: ?Sized> {
    inner: &'a O,
    beta: f64,
    y_hat: Vec<f64>,
}

/// Wraps `oracle` as `f − β‖y − ŷ‖²`.
pub fn prox_augment_y<'a, O: GradientOracle + ?Sized>(
    oracle: &'a O,
    beta: f64,
    y_hat: &[f64],
) -> Result<ProxAugmentY<'a, O>> {
    let (_, m) = oracle.dims();
    if y_hat.len() != m {
        return Err(SolverError::DimensionMismatch { expected: m, got: y_hat.len() });
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(SolverError::InvalidParams("beta must be finite and nonnegative"));
    }
    Ok(ProxAugmentY { inner: oracle, beta, y_hat: y_hat.to_vec() })
}

impl<O: ?Sized> ProxAugmentY<'_, O> {
    #[inline]
    fn sub_prox(&self, y: &[f64], gy: &mut [f64]) {
        let two_beta = 2.0 * self.beta;
        for ((g, yi), ci) in gy.iter_mut().zip(y).zip(&self.y_hat) {
            *g -= two_beta * (yi - ci);
        }
    }
}

impl<O: GradientOracle + ?Sized> GradientOracle for ProxAugmentY<'_, O> {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }
    fn eval_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.inner.eval_into(x, y, gx, gy);
        self.sub_prox(y, gy);
    }
    fn eval_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]) {
        self.inner.eval_x_into(x, y, gx);
    }
    fn eval_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]) {
        self.inner.eval_y_into(x, y, gy);
        self.sub_prox(y, gy);
    }
    fn peek_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.inner.peek_into(x, y, gx, gy);
        self.sub_prox(y, gy);
    }
    fn evaluations(&self) -> u64 {
        self.inner.evaluations()
    }
    fn matvec_products(&self) -> u64 {
        self.inner.matvec_products()
    }
}

/// `h(p, q) = −f(q, p)`: the max player becomes the min player.
///
/// The wrapped oracle's first block is the inner `y`, its second block the
/// inner `x`.
pub struct FlipMinMax<'a, O: ?Sized> {
    inner: &'a O,
}

pub fn flip_minmax<O: GradientOracle + ?Sized>(oracle: &O) -> FlipMinMax<'_, O> {
    FlipMinMax { inner: oracle }
}

impl<O: GradientOracle + ?Sized> GradientOracle for FlipMinMax<'_, O> {
    fn dims(&self) -> (usize, usize) {
        let (n, m) = self.inner.dims();
        (m, n)
    }
    fn eval_into(&self, p: &[f64], q: &[f64], gp: &mut [f64], gq: &mut [f64]) {
        self.inner.eval_into(q, p, gq, gp);
        linalg::negate(gp);
        linalg::negate(gq);
    }
    fn eval_x_into(&self, p: &[f64], q: &[f64], gp: &mut [f64]) {
        self.inner.eval_y_into(q, p, gp);
        linalg::negate(gp);
    }
    fn eval_y_into(&self, p: &[f64], q: &[f64], gq: &mut [f64]) {
        self.inner.eval_x_into(q, p, gq);
        linalg::negate(gq);
    }
    fn peek_into(&self, p: &[f64], q: &[f64], gp: &mut [f64], gq: &mut [f64]) {
        self.inner.peek_into(q, p, gq, gp);
        linalg::negate(gp);
        linalg::negate(gq);
    }
    fn evaluations(&self) -> u64 {
        self.inner.evaluations()
    }
    fn matvec_products(&self) -> u64 {
        self.inner.matvec_products()
    }
}

/// Coordinate map between a rescaled problem and the original one:
/// original `(x, y) = (a·x', b·y')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleMap {
    pub a: f64,
    pub b: f64,
}

impl ScaleMap {
    pub fn to_original(&self, z: &JointPoint) -> JointPoint {
        JointPoint { x: &z.x * self.a, y: &z.y * self.b }
    }
    pub fn from_original(&self, z: &JointPoint) -> JointPoint {
        JointPoint { x: &z.x / self.a, y: &z.y / self.b }
    }
    /// Ratio by which relative errors can grow when mapping back.
    pub fn distortion(&self) -> f64 {
        self.a.max(self.b) / self.a.min(self.b)
    }
}

/// `g(x, y) = f(a·x, b·y)` with `a = (L_y/L_x)^{1/4}`, `b = 1/a`.
pub struct Rescaled<'a, O: ?Sized> {
    inner: &'a O,
    map: ScaleMap,
    scratch: RefCell<(Vec<f64>, Vec<f64>)>,
}

impl<O: ?Sized> Rescaled<'_, O> {
    pub fn map(&self) -> ScaleMap {
        self.map
    }

    fn load(&self, x: &[f64], y: &[f64]) {
        let mut s = self.scratch.borrow_mut();
        let (sx, sy) = &mut *s;
        for (d, v) in sx.iter_mut().zip(x) {
            *d = self.map.a * v;
        }
        for (d, v) in sy.iter_mut().zip(y) {
            *d = self.map.b * v;
        }
    }
}

/// Scaling factors that balance the block smoothness constants.
pub fn balancing_map(params: &SmoothnessParams) -> ScaleMap {
    let a = Float::powf(params.l_y() / params.l_x(), 0.25);
    ScaleMap { a, b: 1.0 / a }
}

/// Parameters of the balanced problem: `L_x' = L_y' = sqrt(L_x L_y)`.
pub fn balanced_params(params: &SmoothnessParams) -> SmoothnessParams {
    if params.l_x() == params.l_y() {
        return *params;
    }
    let map = balancing_map(params);
    let (a2, b2) = (map.a * map.a, map.b * map.b);
    let l = Float::sqrt(params.l_x() * params.l_y());
    SmoothnessParams {
        m_x: (a2 * params.m_x()).min(l),
        m_y: (b2 * params.m_y()).min(l),
        l_x: l,
        l_xy: params.l_xy(),
        l_y: l,
    }
}

/// Balances the block smoothness constants.
///
/// Returns the rescaled oracle, its parameters and the coordinate map back
/// to the original problem.
pub fn rescale<'a, O: GradientOracle + ?Sized>(
    oracle: &'a O,
    params: &SmoothnessParams,
) -> Result<(Rescaled<'a, O>, SmoothnessParams, ScaleMap)> {
    SmoothnessParams::new(params.m_x, params.m_y, params.l_x, params.l_xy, params.l_y)?;
    let map = if params.l_x() == params.l_y() {
        ScaleMap { a: 1.0, b: 1.0 }
    } else {
        balancing_map(params)
    };
    let (n, m) = oracle.dims();
    let wrapped = Rescaled {
        inner: oracle,
        map,
        scratch: RefCell::new((vec![0.0; n], vec![0.0; m])),
    };
    Ok((wrapped, balanced_params(params), map))
}

impl<O: GradientOracle + ?Sized> GradientOracle for Rescaled<'_, O> {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }
    fn eval_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.load(x, y);
        let s = self.scratch.borrow();
        self.inner.eval_into(&s.0, &s.1, gx, gy);
        linalg::scale(self.map.a, gx);
        linalg::scale(self.map.b, gy);
    }
    fn eval_x_into(&self, x: &[f64], y: &[f64], gx: &mut [f64]) {
        self.load(x, y);
        let s = self.scratch.borrow();
        self.inner.eval_x_into(&s.0, &s.1, gx);
        linalg::scale(self.map.a, gx);
    }
    fn eval_y_into(&self, x: &[f64], y: &[f64], gy: &mut [f64]) {
        self.load(x, y);
        let s = self.scratch.borrow();
        self.inner.eval_y_into(&s.0, &s.1, gy);
        linalg::scale(self.map.b, gy);
    }
    fn peek_into(&self, x: &[f64], y: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        self.load(x, y);
        let s = self.scratch.borrow();
        self.inner.peek_into(&s.0, &s.1, gx, gy);
        linalg::scale(self.map.a, gx);
        linalg::scale(self.map.b, gy);
    }
    fn evaluations(&self) -> u64 {
        self.inner.evaluations()
    }
    fn matvec_products(&self) -> u64 {
        self.inner.matvec_products()
    }
}

/// Gradient-norm threshold that certifies `‖z − z*‖ <= eps·‖z0 − z*‖`
/// given only `‖∇f(z0)‖`.
///
/// Uses `min{m_x, m_y}‖z − z*‖ <= ‖∇f(z)‖ <= 2L‖z − z*‖`.
pub fn certified_gradient_threshold(params: &SmoothnessParams, eps: f64, g0_norm: f64) -> f64 {
    params.min_m() * eps * g0_norm / (2.0 * params.l())
}
