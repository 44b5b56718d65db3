use damping_lab::damping::DampingTerm;
use damping_lab::phasespace::{classify, separating_time, transition_sequence, ZoneConfig, ZoneLabel};
use proptest::prelude::*;

fn cfg(eps: f64, n: f64) -> ZoneConfig {
    ZoneConfig { eps, n, ..ZoneConfig::default() }
}

fn unit() -> DampingTerm {
    DampingTerm::constant(1.0).unwrap()
}

#[test]
fn unit_damping_labels() {
    let c = cfg(0.1, 5.0);
    // ⟨ξ⟩_η = √(100 − 1/4) ≥ 5 η.
    assert_eq!(classify(&unit(), &c, 3.0, 10.0).label, ZoneLabel::Hyperbolic);
    assert_eq!(classify(&unit(), &c, 3.0, 0.5).label, ZoneLabel::Reduced);
    assert_eq!(classify(&unit(), &c, 3.0, 0.0).label, ZoneLabel::Elliptic);
    assert_eq!(classify(&unit(), &c, 3.0, 0.6).label, ZoneLabel::PseudoDiff);
}

#[test]
fn separating_time_of_decreasing_threshold() {
    // η(t) = (1+t)^{-1/2} for b = 2(1+t)^{-1/2}; η = 1/2 at t = 3.
    let term = DampingTerm::power_law(2.0, 0.5).unwrap();
    let t = separating_time(&term, &cfg(0.0, 4.0), 0.5).unwrap().unwrap();
    assert!((t - 3.0).abs() < 1e-10, "{t}");
}

#[test]
fn high_frequency_never_separates_under_constant_damping() {
    assert_eq!(separating_time(&unit(), &ZoneConfig::default(), 2.0).unwrap(), None);
}

#[test]
fn separating_time_flips_the_label() {
    let term = DampingTerm::power_law(1.0, 1.0 / 3.0).unwrap();
    let c = cfg(0.1, 4.0);
    let xi = 0.3;
    let t = separating_time(&term, &c, xi).unwrap().unwrap();
    let eta = 0.5 * term.b(t);
    assert!((eta - xi / (1.0 - 0.01_f64).sqrt()).abs() < 1e-10);
    assert_eq!(classify(&term, &c, t * 0.999, xi).label, ZoneLabel::Elliptic);
    assert_eq!(classify(&term, &c, t * 1.001, xi).label, ZoneLabel::Reduced);
}

#[test]
fn decreasing_threshold_itinerary() {
    let term = DampingTerm::power_law(1.0, 1.0 / 3.0).unwrap();
    let labels: Vec<ZoneLabel> =
        transition_sequence(&term, &ZoneConfig::default(), 0.0, 0.1, 1e6).into_iter().map(|(l, _)| l).collect();
    use ZoneLabel::*;
    assert_eq!(labels, vec![Elliptic, Reduced, PseudoDiff, Hyperbolic]);
}

#[test]
fn increasing_threshold_itinerary() {
    let term = DampingTerm::power_law(1.0, -0.5).unwrap();
    let c = ZoneConfig::default();
    let xi = 0.5 * term.b(0.0) * (c.n * c.n + 1.0).sqrt() * 1.01;
    let labels: Vec<ZoneLabel> = transition_sequence(&term, &c, 0.0, xi, 1e4).into_iter().map(|(l, _)| l).collect();
    use ZoneLabel::*;
    assert_eq!(labels, vec![Hyperbolic, PseudoDiff, Reduced, Elliptic]);
}

#[test]
fn constant_damping_high_frequency_stays_hyperbolic() {
    assert_eq!(transition_sequence(&unit(), &ZoneConfig::default(), 0.0, 10.0, 1e4), vec![(ZoneLabel::Hyperbolic, 0.0)]);
}

proptest! {
    #[test]
    fn transitions_are_ordered_and_consistent(kappa in -0.5f64..0.5, xi in 0.01f64..3.0) {
        let term = DampingTerm::power_law(1.0, kappa).unwrap();
        let c = ZoneConfig::default();
        let seq = transition_sequence(&term, &c, 0.0, xi, 1e4);
        prop_assert!(seq.windows(2).all(|w| w[0].1 < w[1].1 && w[0].0 != w[1].0));
        for (label, t) in &seq {
            // The entry time is the first point carrying the label, up to bisection resolution.
            let at = classify(&term, &c, *t, xi).label;
            let after = classify(&term, &c, *t * (1.0 + 1e-9) + 1e-12, xi).label;
            prop_assert!(at == *label || after == *label);
        }
    }
}
