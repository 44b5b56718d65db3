use damping_lab::analysis::{
    admissible, boundedness_exponents, exponent_identity_check, gn_check, gn_ensemble, p_fujita, p_gn, q_in_gn_range,
    theta, two_star, ExponentTable, GnEnsembleConfig, GnParams, GnVariant, PsiSnapshot, Theorem,
};
use damping_lab::semilinear::BoxGrid;
use damping_lab::Error;
use proptest::prelude::*;

fn bump_on(grid: &BoxGrid, center: f64, width: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|j| {
            let z = (grid.coord(j) - center) / width;
            if z.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - z * z)).exp()
            } else {
                0.0
            }
        })
        .collect()
}

#[test]
fn admissibility_examples() {
    assert!(admissible(3, 2.5, Theorem::Low).admissible);
    assert!(admissible(3, 1.8, Theorem::Main).admissible);
    let no = admissible(4, 2.1, Theorem::Low);
    assert!(!no.admissible && no.reason.is_some());
    assert!(!admissible(3, 3.5, Theorem::Main).admissible);
    assert!(!admissible(2, 2.0, Theorem::Main).admissible);
    assert!(admissible(4, 2.0, Theorem::Low).admissible);
    assert!(!admissible(5, 2.0, Theorem::Low).admissible);
}

#[test]
fn critical_exponent_values() {
    assert_eq!(p_fujita(1), 3.0);
    assert_eq!(p_gn(5), 5.0 / 3.0);
    assert_eq!(two_star(3), 6.0);
    assert!(q_in_gn_range(3, 6.0) && !q_in_gn_range(3, 6.5) && !q_in_gn_range(1, 1.5));
    let table = ExponentTable::new(3, 2.0);
    assert_eq!(table.theta_2p, 0.75);
    assert!(table.gn_range && table.main.admissible && table.low.admissible);
}

#[test]
fn identity_examples() {
    let crit = exponent_identity_check(2, 2.0).unwrap();
    assert!(crit.max_residual() < 1e-15 && crit.sign == 0);

    let c = exponent_identity_check(1, 4.0).unwrap();
    assert!((c.values[0] + 0.1).abs() < 1e-15);
    assert!((c.values[1] + 0.125).abs() < 1e-15);
    assert!((c.values[2] + 0.125).abs() < 1e-15);

    assert!((exponent_identity_check(3, 2.0).unwrap().values[2] + 0.25).abs() < 1e-15);
    assert!(exponent_identity_check(3, 1.0).is_err());
}

#[test]
fn first_gn_variant_is_exact_at_the_endpoints() {
    let grid = BoxGrid::new(1, 12.0, 1024).unwrap();
    let v = bump_on(&grid, 0.5, 2.0);
    let psi = PsiSnapshot::quadratic(&grid, 0.125, 1.0);
    for sigma in [0.0, 1.0] {
        for order in [0, 1] {
            let r = gn_check(&grid, &v, &psi, GnParams { sigma, q: 2.0, order }, GnVariant::I).unwrap();
            assert!((r.ratio - 1.0).abs() < 1e-13, "sigma {sigma} order {order}: {}", r.ratio);
            assert_eq!(r.holds, Some(true));
        }
    }
}

#[test]
fn explicit_variants_hold_on_a_random_ensemble() {
    let cfg = GnEnsembleConfig { count: 40, points: 1024, ..GnEnsembleConfig::default() };
    for variant in [GnVariant::I, GnVariant::Ii] {
        let rep = gn_ensemble(variant, &cfg).unwrap();
        assert!(rep.all_hold(), "{variant:?}: {} failures, max ratio {}", rep.failures, rep.max_ratio);
    }
    let implicit = gn_ensemble(GnVariant::Iii, &cfg).unwrap();
    assert!(implicit.results.iter().all(|r| r.holds.is_none() && r.ratio.is_finite()));
}

#[test]
fn weighted_poincare_constant_needs_sigma() {
    // With a small σ the weight barely helps, so the unscaled constant is too
    // small for a wide bump while the σ-scaled one is enough.
    let grid = BoxGrid::new(1, 40.0, 4096).unwrap();
    let v = bump_on(&grid, 0.0, 10.0);
    let psi = PsiSnapshot::quadratic(&grid, 0.125, 1.0);
    let r = gn_check(&grid, &v, &psi, GnParams { sigma: 0.05, q: 2.0, order: 0 }, GnVariant::Iv).unwrap();
    assert_eq!(r.holds, Some(false));
    assert!((r.ratio - 1.81).abs() < 0.05, "{}", r.ratio);
    assert!(r.lhs <= r.sigma_scaled_rhs.unwrap());
}

#[test]
fn gn_check_rejects_bad_inputs() {
    let grid = BoxGrid::new(1, 8.0, 256).unwrap();
    let v = bump_on(&grid, 0.0, 1.0);
    let psi = PsiSnapshot::quadratic(&grid, 0.125, 0.0);
    let bad = |sigma, q, order| gn_check(&grid, &v, &psi, GnParams { sigma, q, order }, GnVariant::I);
    assert!(matches!(bad(1.5, 2.0, 0), Err(Error::InvalidParameter(_))));
    assert!(matches!(bad(0.5, 1.5, 0), Err(Error::InvalidParameter(_))));
    assert!(matches!(bad(0.5, 2.0, 2), Err(Error::InvalidParameter(_))));
    let concave = PsiSnapshot { values: psi.values.iter().map(|p| -p).collect(), laplacian: vec![-0.25; grid.len()] };
    let r = gn_check(&grid, &v, &concave, GnParams { sigma: 0.5, q: 2.0, order: 0 }, GnVariant::Ii);
    assert!(matches!(r, Err(Error::HypothesisViolated(_))));
}

proptest! {
    #[test]
    fn theta_is_the_scaling_weight(n in 1u32..40, q in 2.0f64..200.0) {
        let q = if n >= 3 { q.min(two_star(n)) } else { q };
        let expected = n as f64 * (q - 2.0) / (2.0 * q);
        prop_assert!((theta(n, q) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn last_two_expressions_agree(n in 1u32..13, p in 1.001f64..11.0) {
        let c = exponent_identity_check(n, p).unwrap();
        let closed = (n as f64 / 2.0 + 1.0) / p - n as f64 / 2.0;
        prop_assert!(c.residuals[1] <= 1e-12);
        prop_assert!((c.values[2] - closed).abs() <= 1e-12);
    }

    #[test]
    fn first_expression_has_its_own_closed_form(n in 1u32..13, p in 1.001f64..11.0) {
        let c = exponent_identity_check(n, p).unwrap();
        let closed = (n as f64 + 1.0) / (p + 1.0) - n as f64 / 2.0;
        prop_assert!((c.values[0] - closed).abs() <= 1e-12);
    }

    #[test]
    fn all_expressions_change_sign_at_the_critical_power(n in 1u32..13, p in 1.001f64..11.0) {
        prop_assume!((p - p_fujita(n)).abs() > 1e-6);
        let c = exponent_identity_check(n, p).unwrap();
        prop_assert!(c.signs_agree());
        prop_assert_eq!(c.sign < 0, p > p_fujita(n));
        let [w1, w2] = boundedness_exponents(n, p, 0.0);
        prop_assert_eq!(w1 <= 0.0 && w2 <= 0.0, p > p_fujita(n));
    }
}
