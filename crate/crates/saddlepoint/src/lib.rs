//! Solvers for smooth strongly-convex-strongly-concave minimax problems
//!
//! `min_x max_y f(x, y)` where `f(., y)` is `m_x`-strongly convex and
//! `f(x, .)` is `m_y`-strongly concave. The crate provides:
//!
//! - Alternating Best Response ([`abr`]) for weakly coupled problems,
//! - an inexact accelerated proximal point layer and Proximal Best
//!   Response ([`prox`]) for general problems,
//! - Recursive Hermitian/skew-Hermitian splitting ([`rhss`]) for quadratics,
//! - GDA and ExtraGradient baselines ([`baselines`]),
//! - instance generators with exact ground truth ([`problems`]),
//! - closed-form complexity curves ([`bounds`]) and invariant suites
//!   ([`validation`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod abr;
pub mod agd;
pub mod base;
pub mod baselines;
pub mod bounds;
pub mod linalg;
pub mod problems;
pub mod prox;
pub mod rhss;
pub mod validation;

pub use base::{
    flip_minmax, prox_augment_x, prox_augment_y, rescale, weighted_error, CountingOracle,
    FlipMinMax, GradientOracle, JointPoint, ProxAugmentX, ProxAugmentY, Rescaled, SaddleFunction,
    ScaleMap, SmoothnessParams, SolveMode, SolveReport, SolverError, Termination,
};
pub use problems::{InstanceSpec, QuadraticSaddle, SpectrumShape};
