use gavg_core::scenario::{delta_m, khasminskii_freeze, rho_m, simulate, ControlPolicy, SimSettings};
use gavg_core::system::SystemSource;
use gavg_core::{parse_expr, GFunction, TwoScaleSystem};
use proptest::prelude::*;

fn system(eps: f64) -> TwoScaleSystem {
    SystemSource::scalar("0.5 + 0.5*tanh(y1)", "-y1 + 0.5*tanh(x1)", "1 + 0.25*tanh(y1)", "0.5", "tanh(x1)")
        .epsilon(eps)
        .constants(1.0, 2.0, 2.0)
        .build(GFunction::interval(1.0, 4.0).unwrap())
        .unwrap()
}

fn settings(seed: u64) -> SimSettings {
    SimSettings::new(64, 2e-3, 0.2, seed).start(0.5, -0.3).record_every(10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn batches_are_a_function_of_the_seed(seed in any::<u64>()) {
        let sys = system(0.2);
        let p = ControlPolicy::Constant(2.0);
        let a = simulate(&sys, &p, &settings(seed)).unwrap();
        let b = simulate(&sys, &p, &settings(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        let c = simulate(&sys, &p, &settings(seed.wrapping_add(1))).unwrap();
        prop_assert_ne!(&a.paths, &c.paths);
    }

    #[test]
    fn bang_bang_stays_in_the_set(t in 0.0..1.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let p = ControlPolicy::BangBang { switch: parse_expr("x1 - y1", 1, 1).unwrap(), lo: 1.0, hi: 4.0 };
        p.validate(&GFunction::interval(1.0, 4.0).unwrap()).unwrap();
        let g = p.gamma(t, x, y);
        prop_assert!(g == 1.0 || g == 4.0);
        prop_assert_eq!(g == 4.0, x >= y);
    }

    #[test]
    fn freezing_gate_matches_closed_form(e in 0.01..0.3f64, c in 0.1..4.0f64) {
        let (d1, d2) = (delta_m(e), delta_m(e * 1.1));
        prop_assert!(d1 > 0.0 && d1 < d2);
        // k·δ = √L + L^¼ with L = ln(1/ε).
        let l = (1.0 / e).ln();
        let kd = l.sqrt() + l.powf(0.25);
        let expect = c * kd * d1 * (c * kd).exp();
        prop_assert!((rho_m(e, d1, c) - expect).abs() <= 1e-12 * expect);
    }
}

#[test]
fn thread_count_does_not_change_paths() {
    let sys = system(0.1);
    let p = ControlPolicy::Schedule { times: vec![0.0, 0.1], values: vec![4.0, 1.0] };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| simulate(&sys, &p, &settings(3)).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn out_of_set_controls_are_rejected() {
    let g = GFunction::interval(1.0, 4.0).unwrap();
    assert!(ControlPolicy::Constant(5.0).validate(&g).is_err());
    assert!(ControlPolicy::Schedule { times: vec![0.1], values: vec![2.0] }.validate(&g).is_err());
    assert!(simulate(&system(0.1), &ControlPolicy::Constant(0.5), &settings(0)).is_err());
}

#[test]
fn frozen_fast_drift_gives_zero_gap() {
    let sys = SystemSource::scalar("0.5 + 0.5*tanh(y1)", "-y1", "1", "0.5", "x1")
        .epsilon(0.1)
        .build(GFunction::interval(1.0, 4.0).unwrap())
        .unwrap();
    let batch = simulate(&sys, &ControlPolicy::Constant(2.0), &SimSettings::new(200, 2e-3, 0.5, 1)).unwrap();
    assert_eq!(khasminskii_freeze(&batch).unwrap().gap, 0.0);
}
