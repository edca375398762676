//! Nesterov's accelerated gradient descent for `l`-smooth, `m`-strongly
//! convex minimization with a fixed iteration budget.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::base::{Result, SolverError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgdConfig {
    pub l: f64,
    pub m: f64,
    pub iterations: u64,
}

impl AgdConfig {
    pub fn new(l: f64, m: f64, iterations: u64) -> Result<Self> {
        if !(m > 0.0 && m <= l && l.is_finite()) {
            return Err(SolverError::InvalidParams("AGD needs 0 < m <= l"));
        }
        Ok(Self { l, m, iterations })
    }

    /// Step size `1/l`.
    pub fn eta(&self) -> f64 {
        1.0 / self.l
    }

    pub fn kappa(&self) -> f64 {
        self.l / self.m
    }

    /// Momentum `(√κ − 1)/(√κ + 1)`.
    pub fn theta(&self) -> f64 {
        let s = Float::sqrt(self.kappa());
        (s - 1.0) / (s + 1.0)
    }

    /// Right-hand side of the squared-distance guarantee,
    /// `(κ + 1)(1 − 1/√κ)^T`.
    pub fn contraction_bound(&self) -> f64 {
        let k = self.kappa();
        (k + 1.0) * Float::powf(1.0 - 1.0 / Float::sqrt(k), self.iterations as f64)
    }
}

/// Scratch buffers so that repeated calls do not allocate.
#[derive(Debug, Clone, Default)]
pub struct AgdWorkspace {
    prev: Vec<f64>,
    look: Vec<f64>,
    grad: Vec<f64>,
}

impl AgdWorkspace {
    pub fn new(dim: usize) -> Self {
        Self { prev: vec![0.0; dim], look: vec![0.0; dim], grad: vec![0.0; dim] }
    }

    fn ensure(&mut self, dim: usize) {
        if self.prev.len() != dim {
            *self = Self::new(dim);
        }
    }
}

/// Runs `cfg.iterations` steps in place on `x`, calling `grad` exactly
/// once per step.
///
/// `x_t = x̃_{t−1} − ∇g(x̃_{t−1})/l`, `x̃_t = x_t + θ(x_t − x_{t−1})`,
/// starting from `x̃_0 = x_0`.
pub fn agd_in_place<G>(mut grad: G, x: &mut [f64], cfg: &AgdConfig, ws: &mut AgdWorkspace)
where
    G: FnMut(&[f64], &mut [f64]),
{
    let dim = x.len();
    ws.ensure(dim);
    let eta = cfg.eta();
    let theta = cfg.theta();
    ws.prev.copy_from_slice(x);
    ws.look.copy_from_slice(x);
    for _ in 0..cfg.iterations {
        grad(&ws.look, &mut ws.grad);
        for i in 0..dim {
            let xi = ws.look[i] - eta * ws.grad[i];
            ws.look[i] = xi + theta * (xi - ws.prev[i]);
            ws.prev[i] = xi;
        }
    }
    x.copy_from_slice(&ws.prev);
}

/// Allocating convenience wrapper around [`agd_in_place`].
pub fn agd<G>(grad: G, x0: &[f64], cfg: &AgdConfig) -> Vec<f64>
where
    G: FnMut(&[f64], &mut [f64]),
{
    let mut x = x0.to_vec();
    let mut ws = AgdWorkspace::new(x0.len());
    agd_in_place(grad, &mut x, cfg, &mut ws);
    x
}

/// Steps per best-response solve: `⌈2√κ · ln(24κ)⌉`.
pub fn abr_inner_steps(kappa: f64) -> Result<u64> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(SolverError::InvalidParams("condition number must be finite and >= 1"));
    }
    Ok(Float::ceil(2.0 * Float::sqrt(kappa) * Float::ln(24.0 * kappa)) as u64)
}
