//! Closed-form complexity curves.
//!
//! Each bound comes in two variants: the leading square-root factor times
//! `ln(1/ε)` (or `ln³(1/ε)` for the prior-work curve), and a variant that
//! also carries the known polylogarithmic factors. Only the leading-term
//! variants are expected to be ordered.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::base::{Result, SmoothnessParams, SolverError};
use crate::rhss::{rhss_leading_term, theorem4_bound, DEFAULT_C1, DEFAULT_C2};

fn ln_inv(epsilon: f64) -> f64 {
    Float::ln(1.0 / epsilon)
}

fn ratio(params: &SmoothnessParams) -> f64 {
    params.l() * params.l() / (params.m_x() * params.m_y())
}

/// `√(κ_x + L_xy²/(m_x m_y) + κ_y)`
pub fn lower_leading(p: &SmoothnessParams) -> f64 {
    Float::sqrt(p.kappa_x() + p.l_xy() * p.l_xy() / (p.m_x() * p.m_y()) + p.kappa_y())
}

/// `√(κ_x + L·L_xy/(m_x m_y) + κ_y)`
pub fn pbr_leading(p: &SmoothnessParams) -> f64 {
    Float::sqrt(p.kappa_x() + p.l() * p.l_xy() / (p.m_x() * p.m_y()) + p.kappa_y())
}

/// `√(L²/(m_x m_y))`
pub fn linetal_leading(p: &SmoothnessParams) -> f64 {
    Float::sqrt(ratio(p))
}

/// Square-root factor of the recursive splitting bound. Depth 1 is Proximal
/// Best Response itself, so it uses [`pbr_leading`].
pub fn rhss_leading(p: &SmoothnessParams, k: u32) -> f64 {
    if k <= 1 {
        pbr_leading(p)
    } else {
        rhss_leading_term(p, k)
    }
}

pub fn lower_bound(p: &SmoothnessParams, epsilon: f64) -> f64 {
    lower_leading(p) * ln_inv(epsilon)
}

/// Leading term only; the polylog factors of the full statement are in
/// [`pbr_bound_with_logs`].
pub fn pbr_bound(p: &SmoothnessParams, epsilon: f64) -> f64 {
    pbr_leading(p) * ln_inv(epsilon)
}

/// `pbr_leading · ln³(L²/(m_x m_y)) · ln(L²/(m_x m_y)/ε)`
pub fn pbr_bound_with_logs(p: &SmoothnessParams, epsilon: f64) -> f64 {
    let r = ratio(p);
    pbr_leading(p) * Float::powi(Float::ln(r), 3) * Float::ln(r / epsilon)
}

/// `√(L²/(m_x m_y)) · ln³(1/ε)`
pub fn linetal_bound(p: &SmoothnessParams, epsilon: f64) -> f64 {
    linetal_leading(p) * Float::powi(ln_inv(epsilon), 3)
}

pub fn rhss_bound_leading(p: &SmoothnessParams, k: u32, epsilon: f64) -> f64 {
    rhss_leading(p, k) * ln_inv(epsilon)
}

/// The full depth-`k` bound with `C₁ = 20`, `C₂ = 8` and unit initial
/// distance.
pub fn rhss_bound(p: &SmoothnessParams, k: u32, epsilon: f64) -> f64 {
    theorem4_bound(p, k, epsilon, 1.0, DEFAULT_C1, DEFAULT_C2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub label: String,
    /// `(L_xy, complexity)`, strictly increasing in `L_xy`.
    pub values: Vec<(f64, f64)>,
}

/// Evaluates every curve on `grid`, substituting each `L_xy` into `base`.
///
/// Labels: `lower`, `pbr`, `linetal`, `rhss_k{k}` for leading terms and the
/// same with a `_logs` suffix for the polylog variants.
pub fn bound_curves(base: &SmoothnessParams, grid: &[f64], k: u32, epsilon: f64) -> Result<Vec<BoundCurve>> {
    if grid.is_empty() {
        return Err(SolverError::InvalidConfig("grid must not be empty"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SolverError::InvalidConfig("grid must be strictly increasing"));
    }
    let pts: Vec<SmoothnessParams> = grid
        .iter()
        .map(|&lxy| SmoothnessParams::new(base.m_x(), base.m_y(), base.l_x(), lxy, base.l_y()))
        .collect::<Result<_>>()?;
    let curve = |label: String, f: &dyn Fn(&SmoothnessParams) -> f64| BoundCurve {
        label,
        values: grid.iter().zip(&pts).map(|(&g, p)| (g, f(p))).collect(),
    };
    let kk = alloc::format!("rhss_k{k}");
    Ok(alloc::vec![
        curve("lower".into(), &|p| lower_bound(p, epsilon)),
        curve(kk.clone(), &|p| rhss_bound_leading(p, k, epsilon)),
        curve("pbr".into(), &|p| pbr_bound(p, epsilon)),
        curve("linetal".into(), &|p| linetal_bound(p, epsilon)),
        curve("lower_logs".into(), &|p| lower_bound(p, epsilon)),
        curve(alloc::format!("{kk}_logs"), &|p| rhss_bound(p, k, epsilon)),
        curve("pbr_logs".into(), &|p| pbr_bound_with_logs(p, epsilon)),
        curve("linetal_logs".into(), &|p| linetal_bound(p, epsilon)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m_x: f64, m_y: f64, l_x: f64, l_xy: f64, l_y: f64) -> SmoothnessParams {
        SmoothnessParams::new(m_x, m_y, l_x, l_xy, l_y).unwrap()
    }

    #[test]
    fn uncoupled_lower_bound() {
        let p = params(1.0, 1.0, 50.0, 0.0, 50.0);
        approx::assert_relative_eq!(lower_bound(&p, 1e-3), 100f64.sqrt() * 1e3f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn transcriptions() {
        let (mx, my, lx, lxy, ly, eps) = (0.5f64, 2.0f64, 30.0f64, 40.0f64, 10.0f64, 1e-5f64);
        let p = params(mx, my, lx, lxy, ly);
        let l = 40.0f64;
        let le = (1.0 / eps).ln();
        approx::assert_relative_eq!(lower_bound(&p, eps), (lx / mx + lxy * lxy / (mx * my) + ly / my).sqrt() * le, max_relative = 1e-14);
        approx::assert_relative_eq!(pbr_bound(&p, eps), (lx / mx + l * lxy / (mx * my) + ly / my).sqrt() * le, max_relative = 1e-14);
        approx::assert_relative_eq!(linetal_bound(&p, eps), (l * l / (mx * my)).sqrt() * le.powi(3), max_relative = 1e-14);
        let r = l * l / (mx * my);
        let t4 = (lxy * lxy / (mx * my) + (lx / mx + ly / my) * (1.0 + (lxy / 2.0).powf(0.5))).sqrt()
            * (20.0 * (8.0 * r).ln()).powi(5)
            * le;
        approx::assert_relative_eq!(rhss_bound(&p, 2, eps), t4, max_relative = 1e-12);
    }

    #[test]
    fn monotone_in_coupling() {
        let mut last = [0.0; 4];
        for i in 0..20 {
            let p = params(1.0, 1.0, 1e3, 10f64.powf(i as f64 * 0.15), 1e3);
            let now = [lower_bound(&p, 1e-6), pbr_bound(&p, 1e-6), linetal_bound(&p, 1e-6), rhss_bound(&p, 2, 1e-6)];
            for j in 0..4 {
                assert!(now[j] >= last[j]);
            }
            last = now;
        }
    }

    #[test]
    fn curves_shape() {
        let base = params(1.0, 1.0, 1e4, 1.0, 1e4);
        let c = bound_curves(&base, &[10.0, 100.0, 1000.0], 1, 1e-6).unwrap();
        assert_eq!(c.len(), 8);
        assert!(c.iter().all(|c| c.values.len() == 3));
        assert!(bound_curves(&base, &[], 1, 1e-6).is_err());
        assert!(bound_curves(&base, &[2.0, 1.0], 1, 1e-6).is_err());
    }

    #[test]
    fn leading_ordering_on_grid() {
        // Up to 10^3.5; at L_xy = L_x the κ terms make the square-root factor
        // of pbr exceed √(L²/(m_x m_y)) slightly.
        for i in 0..=70 {
            let lxy = 10f64.powf(i as f64 * 0.05);
            let p = params(1.0, 1.0, 1e4, lxy, 1e4);
            let k = crate::rhss::optimal_k(&p, DEFAULT_C1);
            let (lo, rh, pb, li) = (lower_leading(&p), rhss_leading(&p, k), pbr_leading(&p), linetal_leading(&p));
            assert!(lo <= rh && rh <= pb && pb <= li, "lxy={lxy} k={k}");
        }
    }

    #[test]
    fn ordering_with_epsilon_factors_up_to_l() {
        for i in 0..=80 {
            let p = params(1.0, 1.0, 1e4, 10f64.powf(i as f64 * 0.05), 1e4);
            assert!(pbr_bound(&p, 1e-6) <= linetal_bound(&p, 1e-6));
        }
    }
}
