use std::f64::consts::PI;

use damping_lab::bfun::BProfile;
use damping_lab::damping::DampingTerm;
use damping_lab::semilinear::{
    composite_weights, cross_validate, duhamel_apply, grid_l2, picard_iterate, psi, run_dichotomy, weight_defect,
    BoxGrid, BumpShape, DataSpec, Field, PicardConfig, SemilinearConfig, Solver, SourceHistory, SourceKind, Spectral,
    Verdict,
};
use damping_lab::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn unit() -> BProfile {
    BProfile::new(&DampingTerm::constant(1.0).unwrap()).unwrap()
}

fn bump(amplitude: f64) -> DataSpec {
    DataSpec { shape: BumpShape::GaussianBump, amplitude, radius: 2.0, velocity_amplitude: 0.0 }
}

fn config(half_width: f64, points: usize, p: f64, amplitude: f64, t_final: f64, dt: f64) -> SemilinearConfig {
    SemilinearConfig {
        dimension: 1,
        half_width,
        points,
        p,
        f_sign: SourceKind::AbsPower,
        data: bump(amplitude),
        alpha: 0.125,
        t_final,
        dt,
        c_cfl: 0.5,
        ledger_points: 50,
        blowup_threshold: 1e6,
        noise_floor: 1e-10,
    }
}

/// Classical RK4 for `y'' + b(t) y' + k² y = 0`.
fn rk4_mode(b: impl Fn(f64) -> f64, k2: f64, y0: [f64; 2], t_final: f64, steps: usize) -> [f64; 2] {
    let rhs = |t: f64, y: [f64; 2]| [y[1], -b(t) * y[1] - k2 * y[0]];
    let h = t_final / steps as f64;
    let mut y = y0;
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = rhs(t, y);
        let k2_ = rhs(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(t + h / 2.0, [y[0] + h / 2.0 * k2_[0], y[1] + h / 2.0 * k2_[1]]);
        let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2_[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

#[test]
fn single_fourier_mode_follows_the_mode_equation() {
    // u = ε cos(kx) with ε tiny, so the source |u|^5 is far below roundoff.
    let term = DampingTerm::power_law(1.0, 1.0 / 3.0).unwrap();
    let prof = BProfile::new(&term).unwrap();
    let grid = BoxGrid::new(1, 32.0, 64).unwrap();
    let k = 3.0 * PI / grid.half_width;
    let eps = 1e-8;
    let mut field = Field::zero(grid, 0.5);
    for j in 0..grid.points {
        field.u[j] = eps * (k * grid.coord(j)).cos();
    }
    let mut solver = Solver::new(&field, &prof, 5.0, SourceKind::AbsPower).unwrap();
    let (steps, dt) = (1000, 0.01);
    for _ in 0..steps {
        solver.step(dt).unwrap();
    }
    let [a, da] = rk4_mode(|t| term.b(t), k * k, [1.0, 0.0], 10.0, 20_000);
    let out = solver.field();
    let mut err: f64 = 0.0;
    for j in 0..grid.points {
        let c = (k * grid.coord(j)).cos();
        err = err.max((out.u[j] / eps - a * c).abs()).max((out.ut[j] / eps - da * c).abs());
    }
    assert!(err <= 1e-6 * a.hypot(da), "{err:e}");
}

#[test]
fn strang_splitting_is_second_order() {
    let prof = BProfile::new(&DampingTerm::power_law(1.0, 1.0 / 3.0).unwrap()).unwrap();
    let grid = BoxGrid::new(1, 32.0, 256).unwrap();
    let field = Field::from_data(grid, &bump(0.8)).unwrap();
    let run = |dt: f64| {
        let mut s = Solver::new(&field, &prof, 3.0, SourceKind::AbsPower).unwrap();
        let steps = (4.0 / dt).round() as usize;
        for _ in 0..steps {
            s.step(dt).unwrap();
        }
        s.field().u
    };
    let (a, b, c) = (run(0.1), run(0.05), run(0.025));
    let diff = |x: &[f64], y: &[f64]| grid_l2(&grid, &x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>());
    let ratio = diff(&a, &b) / diff(&b, &c);
    assert!((ratio - 4.0).abs() <= 0.5, "{ratio}");
}

#[test]
fn doubling_the_box_leaves_the_ledger_unchanged() {
    // The grid must resolve the bump's Fourier tail, otherwise the two periodic
    // interpolants differ at the level of the aliasing error.
    let small = SemilinearConfig { data: DataSpec { radius: 4.0, ..bump(0.5) }, ..config(32.0, 1024, 4.0, 0.5, 20.0, 0.025) };
    let large = SemilinearConfig { half_width: 64.0, points: 2048, ..small.clone() };
    let (a, b) = (run_dichotomy(&unit(), &small).unwrap(), run_dichotomy(&unit(), &large).unwrap());
    assert_eq!(a.ledger.times.len(), b.ledger.times.len());
    for (series_a, series_b) in [(&a.ledger.l2, &b.ledger.l2), (&a.ledger.grad_l2, &b.ledger.grad_l2), (&a.ledger.ut_l2, &b.ledger.ut_l2)] {
        for (x, y) in series_a.iter().zip(series_b) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300), "{x} vs {y}");
        }
    }
}

#[test]
fn zero_data_stay_zero() {
    let grid = BoxGrid::new(2, 16.0, 32).unwrap();
    let prof = unit();
    let mut solver = Solver::new(&Field::zero(grid, 1.0), &prof, 2.0, SourceKind::SignedPower).unwrap();
    for _ in 0..20 {
        assert_eq!(solver.step(0.25).unwrap(), 0.0);
    }
    let out = solver.field();
    assert!(out.u.iter().chain(&out.ut).all(|&v| v == 0.0));
}

#[test]
fn steps_respect_the_cfl_and_the_box() {
    let grid = BoxGrid::new(1, 8.0, 32).unwrap();
    let prof = unit();
    let mut solver = Solver::new(&Field::zero(grid, 1.0), &prof, 2.0, SourceKind::AbsPower).unwrap();
    assert!(matches!(solver.step(0.3), Err(Error::CflViolation { .. })));
    for _ in 0..27 {
        solver.step(0.25).unwrap();
    }
    assert!(matches!(solver.step(0.25), Err(Error::BoxBudgetExceeded { .. })));
}

#[test]
fn small_data_above_the_critical_power_decay() {
    let out = run_dichotomy(&unit(), &config(32.0, 256, 4.0, 0.5, 20.0, 0.05)).unwrap();
    assert_eq!(out.verdict, Verdict::DecayedGlobally);
    assert!(out.blowup_time.is_none());
    assert!(out.data_functional > 0.0);
}

#[test]
fn large_data_below_the_critical_power_blow_up() {
    let out = run_dichotomy(&unit(), &config(64.0, 512, 2.0, 5.0, 40.0, 0.1)).unwrap();
    assert_eq!(out.verdict, Verdict::BlewUp);
    assert!(out.blowup_time.unwrap() < 40.0);
}

#[test]
fn critical_weight_has_zero_defect() {
    for r2 in [0.0, 0.3, 7.0, 1e4] {
        for big_b in [0.0, 1.0, 1e3] {
            assert_eq!(weight_defect(0.25, r2, big_b), 0.0);
            assert!(weight_defect(0.125, r2, big_b) <= 0.0);
        }
        assert_eq!(psi(0.2, r2, 0.0), 0.2 * r2);
    }
}

#[test]
fn duhamel_term_of_a_zero_source_vanishes() {
    let grid = BoxGrid::new(1, 16.0, 64).unwrap();
    let mut history = SourceHistory::new(grid);
    for j in 0..=10 {
        history.push(0.1 * j as f64, vec![Complex64::new(0.0, 0.0); grid.len()]);
    }
    let snap = duhamel_apply(&unit(), &history, 1.0).unwrap();
    assert!(snap.u.iter().chain(&snap.ut).all(|&v| v == 0.0));

    // At the initial time the Duhamel term vanishes for any source.
    let mut history = SourceHistory::new(grid);
    history.push(0.0, vec![Complex64::new(1.0, 0.0); grid.len()]);
    let snap = duhamel_apply(&unit(), &history, 0.0).unwrap();
    assert!(snap.u.iter().chain(&snap.ut).all(|&v| v == 0.0));
}

#[test]
fn duhamel_history_must_start_at_zero() {
    let grid = BoxGrid::new(1, 16.0, 64).unwrap();
    let mut history = SourceHistory::new(grid);
    history.push(0.5, vec![Complex64::new(0.0, 0.0); grid.len()]);
    assert!(matches!(duhamel_apply(&unit(), &history, 0.5), Err(Error::HistoryGap { .. })));
}

#[test]
fn stepper_agrees_with_the_duhamel_representation() {
    let check = cross_validate(&unit(), &config(32.0, 256, 4.0, 0.5, 10.0, 0.05)).unwrap();
    assert!(check.discrepancy <= 1e-4 * check.solution_l2, "{check:?}");
    assert!(check.nonlinear_l2 > 0.0);
}

fn picard(amplitude: f64, p: f64) -> PicardConfig {
    PicardConfig {
        dimension: 1,
        half_width: 32.0,
        points: 256,
        p,
        f_sign: SourceKind::AbsPower,
        data: bump(amplitude),
        t_final: 20.0,
        time_steps: 200,
        iterations: 4,
        eps_target: None,
    }
}

#[test]
fn picard_iterates_of_zero_data_are_zero() {
    let rep = picard_iterate(&unit(), &picard(0.0, 4.0)).unwrap();
    assert!(rep.x_norms.iter().chain(&rep.difference_norms).all(|&v| v == 0.0));
}

#[test]
fn picard_iteration_contracts_for_small_data() {
    let rep = picard_iterate(&unit(), &picard(0.5, 4.0)).unwrap();
    assert!(rep.contraction_factors.iter().all(|&q| q < 0.6), "{rep:?}");
}

#[test]
fn picard_iteration_fails_for_large_data_at_low_power() {
    match picard_iterate(&unit(), &picard(5.0, 2.0)) {
        Err(Error::IterationDiverged { .. }) => {}
        Ok(rep) => assert!(rep.contraction_factors.iter().any(|&q| q > 1.0), "{rep:?}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn composite_weights_integrate_cubics_exactly() {
    for k in 1..12 {
        let h = 0.3;
        let w = composite_weights(k, h);
        let exact = |deg: i32| (k as f64 * h).powi(deg + 1) / (deg + 1) as f64;
        let max_deg = if k == 1 { 1 } else { 3 };
        for deg in 0..=max_deg {
            let got: f64 = w.iter().enumerate().map(|(i, wi)| wi * (i as f64 * h).powi(deg)).sum();
            assert!((got - exact(deg)).abs() <= 1e-12 * exact(deg).max(1.0), "k {k} deg {deg}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectral_round_trip(values in proptest::collection::vec(-1.0f64..1.0, 64)) {
        let grid = BoxGrid::new(1, 4.0, 64).unwrap();
        let sp = Spectral::new(grid);
        let back = sp.inverse_real(&sp.forward_real(&values));
        for (a, b) in values.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
        // Parseval on the grid.
        let hat = sp.forward_real(&values);
        prop_assert!((sp.l2_from_hat(&hat) - grid_l2(&grid, &values)).abs() <= 1e-12);
    }

    #[test]
    fn weight_defect_is_nonpositive(alpha in 0.0f64..0.25, r2 in 0.0f64..1e4, big_b in 0.0f64..1e4) {
        prop_assert!(weight_defect(alpha, r2, big_b) <= 0.0);
    }
}
