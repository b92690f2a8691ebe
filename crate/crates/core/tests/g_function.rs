use gavg_core::gcore::ScalarG;
use gavg_core::{eval_g, scalarize, GFunction, SymMat, UncertaintySet};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn sym2() -> impl Strategy<Value = SymMat> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| SymMat::new(2, vec![a, b, b, c]).unwrap())
}

fn psd2() -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-2.0..2.0f64, 4).prop_map(|c| SymMat::gram(2, &c))
}

fn finite_g() -> GFunction {
    let skew = SymMat::new(2, vec![2.0, 0.5, 0.5, 1.5]).unwrap();
    GFunction::new(UncertaintySet::finite(vec![SymMat::identity(2), SymMat::diag(&[4.0, 1.0]), skew]).unwrap()).unwrap()
}

fn scale_tol(a: &SymMat, b: &SymMat) -> f64 {
    let m = a.entries().iter().chain(b.entries()).fold(1.0f64, |m, v| m.max(v.abs()));
    TOL * 10.0 * m
}

proptest! {
    #[test]
    fn interval_matches_scalar_form(m in -100.0..100.0f64, lo in 0.1..2.0f64, extra in 0.0..5.0f64) {
        let g = GFunction::interval(lo, lo + extra).unwrap();
        let direct = scalarize(&g, m).unwrap();
        let fast = g.scalar_form().unwrap().apply(m);
        prop_assert!((direct - fast).abs() <= TOL * m.abs().max(1.0));
        let by_hand = if m >= 0.0 { 0.5 * (lo + extra) * m } else { 0.5 * lo * m };
        prop_assert!((direct - by_hand).abs() <= TOL * m.abs().max(1.0));
    }

    #[test]
    fn finite_set_is_monotone(a in sym2(), p in psd2()) {
        let g = finite_g();
        prop_assert!(eval_g(&g, &a.add(&p)).unwrap() >= eval_g(&g, &a).unwrap() - scale_tol(&a, &p));
    }

    #[test]
    fn finite_set_is_subadditive(a in sym2(), b in sym2()) {
        let g = finite_g();
        let lhs = eval_g(&g, &a.add(&b)).unwrap();
        let rhs = eval_g(&g, &a).unwrap() + eval_g(&g, &b).unwrap();
        prop_assert!(lhs <= rhs + scale_tol(&a, &b));
    }

    #[test]
    fn finite_set_is_positively_homogeneous(a in sym2(), lambda in 0.0..20.0f64) {
        let g = finite_g();
        let lhs = eval_g(&g, &a.scale(lambda)).unwrap();
        let rhs = lambda * eval_g(&g, &a).unwrap();
        prop_assert!((lhs - rhs).abs() <= scale_tol(&a, &a) * lambda.max(1.0));
    }

    #[test]
    fn finite_set_is_sandwiched(a in sym2(), p in psd2()) {
        // (floor/2)·tr P ≤ G(A+P) − G(A) ≤ (cap/2)·tr P
        let g = finite_g();
        let d = eval_g(&g, &a.add(&p)).unwrap() - eval_g(&g, &a).unwrap();
        let t = p.trace();
        let tol = scale_tol(&a, &p);
        prop_assert!(d >= 0.5 * g.nondegeneracy_floor() * t - tol);
        prop_assert!(d <= 0.5 * g.nondegeneracy_cap() * t + tol);
    }

    #[test]
    fn scalar_g_argmax_attains(m in -50.0..50.0f64, lo in 0.1..2.0f64, hi in 2.0..6.0f64) {
        let s = ScalarG { half_lo: 0.5 * lo, half_hi: 0.5 * hi };
        prop_assert_eq!(s.apply(m), 0.5 * s.argmax(m) * m);
    }
}

#[test]
fn degenerate_sets_are_rejected() {
    assert!(GFunction::interval(0.0, 1.0).is_err());
    assert!(GFunction::interval(2.0, 1.0).is_err());
    let singular = SymMat::diag(&[1.0, 0.0]);
    assert!(GFunction::new(UncertaintySet::finite(vec![singular]).unwrap()).is_err());
    assert!(UncertaintySet::finite(vec![SymMat::identity(2), SymMat::identity(3)]).is_err());
}

#[test]
fn zero_maps_to_zero() {
    assert_eq!(eval_g(&finite_g(), &SymMat::zeros(2)).unwrap(), 0.0);
    assert_eq!(scalarize(&GFunction::interval(1.0, 4.0).unwrap(), 0.0).unwrap(), 0.0);
}
