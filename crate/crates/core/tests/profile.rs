mod common;

use common::{profile, relaxation_oracle};
use proptest::prelude::*;
use vortex_core::profile::{solve_profile, tail};

#[test]
fn shooting_matches_relaxation() {
    let p = profile();
    let h = 1e-3;
    let (a, vals) = relaxation_oracle(h, 40.0);
    let da = (p.slope_at_origin() - a).abs();
    assert!(da < 1e-6, "slope at origin {} vs oracle {a}: {da:e}", p.slope_at_origin());
    let mut worst = 0.0f64;
    for (i, v) in vals.iter().enumerate() {
        let r = i as f64 * 2.0 * h;
        if r > 20.0 {
            break;
        }
        worst = worst.max((p.rho(r) - v).abs());
    }
    assert!(worst < 1e-7, "pointwise gap {worst:e}");
}

#[test]
fn tail_agreement_at_25() {
    let p = profile();
    let gap = (p.rho(25.0) - tail(25.0)[0]).abs();
    assert!(gap <= 5e-8, "{gap:e}");
}

#[test]
fn residual_bound_scales_with_tol() {
    let p = solve_profile(30.0, 1e-9).unwrap();
    assert!(p.ode_residual_sup(0.01, 30.0) <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn profile_is_increasing_and_bounded(r in 0.0f64..200.0, dr in 1e-3f64..5.0) {
        let p = profile();
        let (a, b) = (p.rho(r), p.rho(r + dr));
        prop_assert!(a < b);
        prop_assert!((0.0..1.0).contains(&a));
        prop_assert!(p.drho(r) > 0.0);
    }

    #[test]
    fn deficit_matches_value(r in 0.0f64..40.0) {
        let p = profile();
        let v = p.rho(r);
        prop_assert!((p.one_minus_rho_sq(r) - (1.0 - v * v)).abs() < 1e-14);
    }

    #[test]
    fn second_derivative_consistent(r in 0.05f64..35.0) {
        let p = profile();
        let h = 1e-4;
        let fd = (p.drho(r + h) - p.drho(r - h)) / (2.0 * h);
        prop_assert!((p.eval(r, 2).unwrap() - fd).abs() < 1e-6);
    }
}
