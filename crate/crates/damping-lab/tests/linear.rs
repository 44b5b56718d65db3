use std::f64::consts::PI;

use approx::assert_relative_eq;
use damping_lab::bfun::BProfile;
use damping_lab::damping::DampingTerm;
use damping_lab::linear::{decay_curve, s_uniformity_scan, verify_matsumura, Deriv, LinearOptions, RadialDatum};
use damping_lab::modes::constant_damping_multiplier;

fn unit() -> BProfile {
    BProfile::new(&DampingTerm::constant(1.0).unwrap()).unwrap()
}

#[test]
fn initial_values_follow_the_data() {
    let datum = RadialDatum::new(1, 1.0, 0.0).unwrap();
    let curve = decay_curve(&unit(), &datum, 0.0, &[0.0, 1.0], &[Deriv::U, Deriv::UT], &LinearOptions::default()).unwrap();
    assert_eq!(curve.values[0][0], 0.0);
    assert_relative_eq!(curve.values[1][0], datum.l2_norm, max_relative = 1e-7);
}

#[test]
fn norms_match_a_dense_plancherel_sum() {
    // ĝ(ξ) = e^{-ξ²} in one dimension; ‖v‖² = (2π)^{-1} ∫ |Φ̂(t,ξ)|² e^{-2ξ²} dξ.
    let datum = RadialDatum::new(1, 1.0, 0.0).unwrap();
    let times = [0.5, 3.0, 20.0];
    let curve = decay_curve(&unit(), &datum, 0.0, &times, &[Deriv::U, Deriv::GRAD, Deriv::UT], &LinearOptions::default()).unwrap();
    let n = 600_000;
    let h = 12.0 / n as f64;
    for (j, &t) in times.iter().enumerate() {
        let mut acc = [0.0; 3];
        for k in 0..n {
            let xi = (k as f64 + 0.5) * h;
            let (f, df) = constant_damping_multiplier(1.0, xi, t);
            let w = (-2.0 * xi * xi).exp();
            acc[0] += f * f * w;
            acc[1] += xi * xi * f * f * w;
            acc[2] += df * df * w;
        }
        for d in 0..3 {
            let exact = (2.0 * acc[d] * h / (2.0 * PI)).sqrt();
            assert_relative_eq!(curve.values[d][j], exact, max_relative = 1e-5);
        }
    }
}

#[test]
fn unit_damping_l1_data_decay_at_the_diffusive_rate() {
    let datum = RadialDatum::matched(1, 1.0).unwrap();
    let (_, fits) = verify_matsumura(&unit(), &datum, 0.0, &[Deriv::U], (1e2, 1e4), &LinearOptions::default()).unwrap();
    assert!((fits[0].slope + 0.25).abs() <= 0.05, "{}", fits[0].slope);
}

#[test]
fn l2_data_do_not_decay() {
    let prof = BProfile::new(&DampingTerm::power_law(1.0, 1.0 / 3.0).unwrap()).unwrap();
    let datum = RadialDatum::matched(2, 2.0).unwrap();
    let (_, fits) = verify_matsumura(&prof, &datum, 0.0, &[Deriv::U], (1e2, 1e4), &LinearOptions::default()).unwrap();
    assert!(fits[0].slope.abs() <= 0.05, "{}", fits[0].slope);
}

#[test]
fn gradient_decays_half_a_power_faster_in_the_clock() {
    let prof = BProfile::new(&DampingTerm::power_law(1.0, 1.0 / 3.0).unwrap()).unwrap();
    let datum = RadialDatum::matched(2, 1.0).unwrap();
    let (_, fits) = verify_matsumura(&prof, &datum, 0.0, &[Deriv::GRAD], (1e2, 1e4), &LinearOptions::default()).unwrap();
    assert!((fits[0].slope + 1.0).abs() <= 0.05, "{}", fits[0].slope);
}

#[test]
fn constant_damping_prefactor_is_time_translation_invariant() {
    let datum = RadialDatum::matched(1, 1.0).unwrap();
    let rep = s_uniformity_scan(&unit(), &datum, &[0.0, 5.0, 20.0], Deriv::U, 1e3, &LinearOptions::default()).unwrap();
    assert!((rep.ratio - 1.0).abs() < 1e-6 && (rep.sup_ratio - 1.0).abs() < 1e-6, "{rep:?}");
}

#[test]
fn velocity_prefactor_is_not_uniform_in_the_initial_layer_for_growing_damping() {
    // At t = s, ‖v_t‖ = ‖g‖₂ while the shape b(s)^{-1} b(t)^{-1} is b(s)^{-2}.
    let prof = BProfile::new(&DampingTerm::power_law(1.0, -0.5).unwrap()).unwrap();
    let datum = RadialDatum::matched(1, 1.0).unwrap();
    let rep = s_uniformity_scan(&prof, &datum, &[0.0, 100.0], Deriv::UT, 1e3, &LinearOptions::default()).unwrap();
    let b100 = prof.term().b(100.0);
    assert!(rep.sup_prefactors[1] >= 0.9 * b100 * b100 * datum.l2_norm / datum.lm_hk_norm(0), "{rep:?}");
    assert!(rep.ratio < 10.0, "{rep:?}");
}
