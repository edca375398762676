//! Property tests over randomly drawn class parameters and seeds.

use nalgebra::DVector;
use proptest::prelude::*;

use saddlepoint::abr::{abr_solve, AbrConfig};
use saddlepoint::baselines::{certified_stop, eg_solve, BaselineConfig};
use saddlepoint::bounds::{linetal_leading, lower_leading, pbr_leading, rhss_leading};
use saddlepoint::problems::{direct_saddle, duality_gap, make_quadratic, InstanceSpec, QuadraticSaddle};
use saddlepoint::prox::{pbr_solve, AppaConfig, AppaStop, PbrConfig, PbrConstants};
use saddlepoint::rhss::{optimal_k, rhss_solve, RhssConfig, DEFAULT_C1};
use saddlepoint::validation::facts_suite;
use saddlepoint::{rescale, CountingOracle, GradientOracle, JointPoint, SmoothnessParams, SolveMode, Termination};

/// Moduli in [0.2, 5], condition numbers up to `kmax`, coupling either zero
/// or a fraction in [0.01, 1] of the largest block constant.
fn params_up_to(kmax: f64) -> impl Strategy<Value = SmoothnessParams> {
    (0.2f64..5.0, 0.2f64..5.0, 1.0f64..kmax, 1.0f64..kmax, prop_oneof![Just(0.0), 0.01f64..1.0]).prop_map(
        |(m_x, m_y, kx, ky, frac)| {
            let (l_x, l_y) = (kx * m_x, ky * m_y);
            SmoothnessParams::new(m_x, m_y, l_x, frac * l_x.max(l_y), l_y).unwrap()
        },
    )
}

fn instance(n: usize, m: usize, p: SmoothnessParams, seed: u64) -> QuadraticSaddle {
    make_quadratic(&InstanceSpec::new(n, m, p, seed)).unwrap()
}

fn start(n: usize, m: usize) -> JointPoint {
    JointPoint {
        x: DVector::from_fn(n, |i, _| 1.0 - 0.3 * i as f64),
        y: DVector::from_fn(m, |i, _| 0.5 + 0.2 * i as f64),
    }
}

fn relative_error(z: &JointPoint, z0: &JointPoint, zs: &JointPoint) -> f64 {
    z.distance(zs) / z0.distance(zs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_spectrum_matches_declared(p in params_up_to(1e3), n in 2usize..7, m in 2usize..7, seed in any::<u64>()) {
        // One-dimensional blocks can only carry m = L, so sizes start at 2.
        let q = instance(n, m, p, seed);
        prop_assert!(q.verify(&p, 1e-10).is_ok(), "{:?} vs {:?}", q.measured_params().unwrap(), p);
    }

    #[test]
    fn seed_determines_instance(p in params_up_to(1e2), seed in any::<u64>()) {
        let a = instance(4, 3, p, seed);
        let b = instance(4, 3, p, seed);
        prop_assert_eq!(a.a(), b.a());
        prop_assert_eq!(a.b(), b.b());
        prop_assert_eq!(a.u(), b.u());
        let c = instance(4, 3, p, seed.wrapping_add(1));
        prop_assert_ne!(a.u(), c.u());
    }

    #[test]
    fn flipping_twice_is_identity(p in params_up_to(1e2), seed in any::<u64>()) {
        let q = instance(3, 4, p, seed);
        let back = q.flipped().flipped();
        prop_assert_eq!(back.a(), q.a());
        prop_assert_eq!(back.b(), q.b());
        prop_assert_eq!(back.c(), q.c());
        prop_assert_eq!(back.u(), q.u());
        prop_assert_eq!(back.v(), q.v());
    }

    #[test]
    fn rescaling_balances_and_round_trips(p in params_up_to(1e3), seed in any::<u64>()) {
        let q = instance(3, 3, p, seed);
        let o = CountingOracle::new(&q);
        let (_, p2, map) = rescale(&o, &p).unwrap();
        prop_assert!((p2.l_x() - p2.l_y()).abs() <= 1e-12 * p2.l_x());
        prop_assert!(map.distortion() >= 1.0);
        let z = start(3, 3);
        let back = map.to_original(&map.from_original(&z));
        prop_assert!(back.distance(&z) <= 1e-14 * z.norm());
    }

    #[test]
    fn analytic_facts_hold(seed in any::<u64>()) {
        for c in facts_suite(seed, 1, 4).unwrap() {
            prop_assert!(c.passed(), "{} worst {}", c.name, c.worst_ratio);
        }
    }

    #[test]
    fn duality_gap_is_nonnegative_and_zero_at_saddle(p in params_up_to(1e2), seed in any::<u64>(), s in -2.0f64..2.0) {
        let q = instance(4, 3, p, seed);
        let zs = direct_saddle(&q).unwrap();
        prop_assert!(duality_gap(&q, &zs).unwrap().abs() <= 1e-9 * (1.0 + zs.norm().powi(2) * p.l()));
        let z = JointPoint { x: &zs.x + DVector::from_element(4, s), y: &zs.y - DVector::from_element(3, s) };
        prop_assert!(duality_gap(&q, &z).unwrap() >= -1e-9);
    }

    #[test]
    fn pbr_inner_problem_is_weakly_coupled(p in params_up_to(1e4)) {
        let k = PbrConstants::from_params(&p);
        prop_assert!(k.beta1 * k.beta2 >= p.l_xy() * p.l_xy());
        prop_assert!(k.abr_params(&p).unwrap().weakly_coupled());
    }

    #[test]
    fn appa_momentum_matches_condition_number(modulus in 0.01f64..10.0, ratio in 1.0f64..1e4) {
        let c = AppaConfig::new(modulus * ratio, modulus, AppaStop::Iterations(1));
        let kappa = c.kappa();
        prop_assert!((kappa - ratio).abs() <= 1e-12 * ratio);
        let s = 2.0 * kappa.sqrt();
        prop_assert!((c.theta() - (s - 1.0) / (s + 1.0)).abs() <= 1e-15);
        prop_assert!((c.tau() - 1.0 / (s + 4.0 * kappa)).abs() <= 1e-15);
        prop_assert!(c.theta() >= 1.0 / 3.0 && c.theta() < 1.0);
    }

    // The PBR leading term exceeds the √(L²/(m_x m_y)) one once
    // L_xy > L − m_x − m_y, so the sliver next to L_x is excluded.
    #[test]
    fn leading_terms_are_ordered(m_x in 0.2f64..5.0, m_y in 0.2f64..5.0, l in 1e2f64..1e5, t in 0.0f64..1.0) {
        let lo = m_x.max(m_y);
        let hi = l - m_x - m_y;
        let l_xy = lo + t * (hi - lo);
        let p = SmoothnessParams::new(m_x, m_y, l, l_xy, l).unwrap();
        let k = optimal_k(&p, DEFAULT_C1);
        let (a, b, c, d) = (lower_leading(&p), rhss_leading(&p, k), pbr_leading(&p), linetal_leading(&p));
        prop_assert!(a <= b * (1.0 + 1e-12), "lower {a} rhss {b} (k = {k})");
        prop_assert!(b <= c * (1.0 + 1e-12), "rhss {b} pbr {c} (k = {k})");
        prop_assert!(c <= d * (1.0 + 1e-12), "pbr {c} linetal {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pbr_meets_target_when_it_says_so(p in params_up_to(1e2), seed in any::<u64>()) {
        let q = instance(5, 4, p, seed);
        let zs = direct_saddle(&q).unwrap();
        let z0 = start(5, 4);
        let eps = 1e-4;
        let r = pbr_solve(&CountingOracle::new(&q), &z0, &p, &PbrConfig::new(eps, SolveMode::Practical)).unwrap();
        prop_assert_eq!(r.termination, Termination::ToleranceMet);
        prop_assert!(relative_error(&r.final_point, &z0, &zs) <= eps);
    }

    #[test]
    fn rhss_meets_target_when_it_says_so(p in params_up_to(1e2), seed in any::<u64>(), k in 1u32..3) {
        let q = instance(4, 5, p, seed);
        let zs = direct_saddle(&q).unwrap();
        let z0 = start(4, 5);
        let eps = 1e-4;
        let r = rhss_solve(&q, &p, &z0, &RhssConfig::new(k, eps, SolveMode::Practical)).unwrap();
        prop_assert_eq!(r.termination, Termination::ToleranceMet);
        prop_assert!(relative_error(&r.final_point, &z0, &zs) <= eps);
    }

    #[test]
    fn extragradient_certificate_is_sound(p in params_up_to(30.0), seed in any::<u64>()) {
        let q = instance(4, 4, p, seed);
        let zs = direct_saddle(&q).unwrap();
        let z0 = start(4, 4);
        let eps = 1e-5;
        let o = CountingOracle::new(&q);
        let cfg = BaselineConfig::extragradient(&p, certified_stop(&o, &z0, &p, eps));
        let r = eg_solve(&o, &z0, &cfg).unwrap();
        prop_assert_eq!(r.termination, Termination::ToleranceMet);
        prop_assert!(relative_error(&r.final_point, &z0, &zs) <= eps);
    }

    #[test]
    fn abr_contracts_summed_error(m_x in 0.2f64..5.0, m_y in 0.2f64..5.0, kx in 1.0f64..1e3, ky in 1.0f64..1e3, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let p = SmoothnessParams::new(m_x, m_y, kx * m_x, frac * 0.5 * (m_x * m_y).sqrt(), ky * m_y).unwrap();
        let q = instance(4, 3, p, seed);
        let zs = direct_saddle(&q).unwrap();
        let z0 = start(4, 3);
        let eps = 1e-6;
        let r = abr_solve(&CountingOracle::new(&q), &z0, &AbrConfig::new(eps, p)).unwrap();
        let summed = |z: &JointPoint| (&z.x - &zs.x).norm() + (&z.y - &zs.y).norm();
        prop_assert!(summed(&r.final_point) <= eps * summed(&z0) + 1e-12 * zs.norm());
        prop_assert!(CountingOracle::new(&q).eval(&r.final_point).norm().is_finite());
    }
}
