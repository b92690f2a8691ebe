use gavg_core::ergogen::GeneratorTable;
use gavg_core::fnpde::{solve_averaged_from, solve_gheat_1d, solve_two_scale_from, Axis, GridSolution, GridSpec};
use gavg_core::system::SystemSource;
use gavg_core::{parse_expr, GFunction, TwoScaleSystem};
use proptest::prelude::*;

const NS: usize = 9;
const NF: usize = 7;

fn system() -> TwoScaleSystem {
    SystemSource::scalar("tanh(y1) + 0.2*x1", "-y1", "1 + 0.25*sin(y1)", "0.5", "x1")
        .h("0.1*cos(y1)", "0")
        .epsilon(0.3)
        .build(GFunction::interval(1.0, 4.0).unwrap())
        .unwrap()
}

fn two_scale_spec() -> GridSpec {
    GridSpec::new(Axis::new(-1.0, 1.0, NS).unwrap(), Some(Axis::new(-1.5, 1.5, NF).unwrap()), 0.005, 0)
        .unwrap()
        .with_snapshots(4)
        .unwrap()
}

fn table() -> GeneratorTable {
    GeneratorTable::from_fn(vec![-2.0, 0.0, 2.0], 16, |x, p, a| 0.5 * (4.0 * a.max(0.0) + a.min(0.0)) + (0.3 + 0.1 * x) * p + 0.2 * p.abs())
        .unwrap()
}

fn ordered(lo: &GridSolution, hi: &GridSolution) -> bool {
    lo.slices.iter().zip(&hi.slices).all(|(a, b)| a.values.iter().zip(&b.values).all(|(u, v)| u <= v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn two_scale_comparison(u in prop::collection::vec(-1.0..1.0f64, NS * NF), bump in prop::collection::vec(0.0..1.0f64, NS * NF)) {
        let (sys, spec) = (system(), two_scale_spec());
        let v: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let a = solve_two_scale_from(&sys, &spec, u).unwrap();
        let b = solve_two_scale_from(&sys, &spec, v).unwrap();
        prop_assert!(ordered(&a, &b));
    }

    #[test]
    fn two_scale_commutes_with_constants(u in prop::collection::vec(-1.0..1.0f64, NS * NF), c in -5.0..5.0f64) {
        let (sys, spec) = (system(), two_scale_spec());
        let shifted: Vec<f64> = u.iter().map(|x| x + c).collect();
        let a = solve_two_scale_from(&sys, &spec, u).unwrap();
        let b = solve_two_scale_from(&sys, &spec, shifted).unwrap();
        for (x, y) in a.last().values.iter().zip(&b.last().values) {
            prop_assert!((x + c - y).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn averaged_comparison_and_max_principle(u in prop::collection::vec(-1.0..1.0f64, 21), bump in prop::collection::vec(0.0..1.0f64, 21)) {
        let spec = GridSpec::new(Axis::new(-1.0, 1.0, 21).unwrap(), None, 0.05, 0).unwrap();
        let v: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let bound = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let a = solve_averaged_from(&table(), &spec, u).unwrap();
        let b = solve_averaged_from(&table(), &spec, v).unwrap();
        prop_assert!(ordered(&a, &b));
        prop_assert!(a.last().values.iter().all(|x| x.abs() <= bound + 1e-12));
    }

    #[test]
    fn gheat_is_monotone_in_volatility(lo in 0.2..1.0f64, hi in 1.0..3.0f64, extra in 0.0..2.0f64) {
        // A wider interval can only raise the value of a fixed datum.
        let spec = GridSpec::new(Axis::new(-2.0, 2.0, 41).unwrap(), None, 0.1, 0).unwrap();
        let phi = parse_expr("sin(3*x1) + 0.5*x1^2", 1, 0).unwrap();
        let a = solve_gheat_1d(&GFunction::interval(lo, hi).unwrap(), 0.0, 1.0, &phi, &spec).unwrap();
        let b = solve_gheat_1d(&GFunction::interval(lo, hi + extra).unwrap(), 0.0, 1.0, &phi, &spec).unwrap();
        let m = a.mask_depth(a.last().step);
        for i in m..41 - m {
            prop_assert!(a.last().values[i] <= b.last().values[i] + 1e-3);
        }
    }

    #[test]
    fn table_is_positively_homogeneous(x in -2.0..2.0f64, theta in 0.0..std::f64::consts::TAU, r in 0.0..50.0f64) {
        let t = table();
        let (p, a) = (theta.cos(), theta.sin());
        let base = t.eval(x, p, a).unwrap();
        prop_assert!((t.eval(x, r * p, r * a).unwrap() - r * base).abs() <= 1e-12 * (r * base).abs().max(1.0));
    }
}

#[test]
fn table_reproduces_its_source_on_directions() {
    let t = table();
    for k in 0..t.n_directions() {
        let (p, a) = t.direction(k);
        let exact = 0.5 * (4.0 * a.max(0.0) + a.min(0.0)) + 0.3 * p + 0.2 * p.abs();
        assert!((t.eval(0.0, p, a).unwrap() - exact).abs() <= 1e-12);
    }
    assert!(t.eval(3.0, 1.0, 0.0).is_err());
}
