//! Acceptance suite. Criteria run in order on the calling thread so that the
//! wall-clock budgets are not shared with other tests; each prints one line
//! and the process exits nonzero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Display;
use std::process::ExitCode;
use std::time::Instant;

use gavg::config::{ExperimentConfig, ExperimentKind};
use gavg::experiments::{self, FindimRoute, Report};
use gavg::{render, with_threads};
use gavg_core::fnpde::{dpp_check, GridSolution};
use gavg_core::{check_axioms, GFunction, SymMat, UncertaintySet};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

const SLOW_FAST_TANH: &str = include_str!("../configs/slow_fast_tanh.toml");
const MAXIMAL: &str = include_str!("../configs/maximal.toml");
const GHEAT_CONVEX: &str = include_str!("../configs/gheat_convex.toml");
const GHEAT_CONCAVE: &str = include_str!("../configs/gheat_concave.toml");
const ERGODIC_TANH: &str = include_str!("../configs/ergodic_tanh.toml");
const TABLE_PROPERTIES: &str = include_str!("../configs/table_properties.toml");
const CONTRACTION_DET: &str = include_str!("../configs/contraction_deterministic.toml");
const CONTRACTION_OU: &str = include_str!("../configs/contraction_ou.toml");
const KHASMINSKII: &str = include_str!("../configs/khasminskii.toml");
const MOMENTS: &str = include_str!("../configs/moments.toml");
const SIMULATE: &str = include_str!("../configs/simulate.toml");

const FINDIM_PHI: &str = r#"findim_phi = "tanh(x1) + tanh(x2)""#;
const LADDER: &str = "epsilons = [0.4, 0.2, 0.1, 0.05]";

/// The shipped configurations, each with the experiment it is run as.
const FIXTURES: &[(&str, &str, ExperimentKind)] = &[
    ("gheat_convex", GHEAT_CONVEX, ExperimentKind::GheatOracle),
    ("gheat_concave", GHEAT_CONCAVE, ExperimentKind::GheatOracle),
    ("ergodic_tanh", ERGODIC_TANH, ExperimentKind::Generator),
    ("table_properties", TABLE_PROPERTIES, ExperimentKind::Generator),
    ("converge", SLOW_FAST_TANH, ExperimentKind::Converge),
    ("maximal", MAXIMAL, ExperimentKind::MaxOracle),
    ("findim", SLOW_FAST_TANH, ExperimentKind::Findim),
    ("contraction_deterministic", CONTRACTION_DET, ExperimentKind::Contraction),
    ("contraction_ou", CONTRACTION_OU, ExperimentKind::Contraction),
    ("khasminskii", KHASMINSKII, ExperimentKind::Khasminskii),
    ("moments", MOMENTS, ExperimentKind::Moments),
    ("simulate", SIMULATE, ExperimentKind::Simulate),
];

fn edit(text: &str, edits: &[(&str, &str)], extra: &[&str]) -> String {
    let mut out = text.to_string();
    for (from, to) in edits {
        assert!(out.contains(from), "fixture line `{from}` not found");
        out = out.replace(from, to);
    }
    // [experiment] is the last table of every fixture.
    for line in extra {
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Fixtures plus the variants derived from them.
fn source(name: &str) -> (String, ExperimentKind) {
    if let Some((_, text, kind)) = FIXTURES.iter().find(|f| f.0 == name) {
        return (text.to_string(), *kind);
    }
    let findim = |phi: &str, extra: &[&str], single: bool| {
        let phi_line = format!("findim_phi = \"{phi}\"");
        let mut edits = vec![(FINDIM_PHI, phi_line.as_str())];
        if single {
            edits.push((LADDER, "epsilons = [0.4]"));
        }
        (edit(SLOW_FAST_TANH, &edits, extra), ExperimentKind::Findim)
    };
    match name {
        "findim_b" => findim("tanh(x2)", &[], false),
        "findim_a" => findim("tanh(x1)", &[], false),
        "findim_nested_a" => findim("tanh(x1)", &["findim_mode = \"nested\"", "findim_stride = 1"], true),
        "findim_nested_b" => findim("tanh(x2)", &["findim_mode = \"nested\""], true),
        "khasminskii_frozen" => (
            edit(KHASMINSKII, &[(r#"b_bar = "-y1 + 0.5*tanh(x1)""#, r#"b_bar = "-y1""#), ("paths = 10000", "paths = 2000")], &[]),
            ExperimentKind::Khasminskii,
        ),
        _ => panic!("unknown fixture {name}"),
    }
}

fn s<E: Display>(e: E) -> String {
    e.to_string()
}

fn execute(text: &str, kind: ExperimentKind, threads: usize) -> Result<(Report, f64), String> {
    let cfg = ExperimentConfig::from_toml(text).map_err(s)?;
    with_threads(threads, || experiments::run(&cfg, kind)).map_err(s)?.map_err(s)
}

struct Run {
    report: Report,
    wall: f64,
}

#[derive(Default)]
struct Suite {
    runs: BTreeMap<String, Run>,
}

impl Suite {
    /// Runs (single-threaded) every listed experiment not yet cached.
    fn load(&mut self, names: &[&str]) -> Result<(), String> {
        for name in names {
            if !self.runs.contains_key(*name) {
                let (text, kind) = source(name);
                let (report, wall) = execute(&text, kind, 1).map_err(|e| format!("{name}: {e}"))?;
                self.runs.insert(name.to_string(), Run { report, wall });
            }
        }
        Ok(())
    }

    fn get(&self, name: &str) -> &Run {
        &self.runs[name]
    }

    fn wall(&self, names: &[&str]) -> f64 {
        names.iter().map(|n| self.get(n).wall).sum()
    }
}

macro_rules! report {
    ($run:expr, $variant:ident) => {
        match &$run.report {
            Report::$variant(r) => &**r,
            other => return Err(format!("unexpected report kind {}", other.kind())),
        }
    };
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

type Outcome = Result<String, String>;

fn criterion_1(_: &mut Suite) -> Outcome {
    let clock = Instant::now();
    let sets = [
        ("interval [1,4]", UncertaintySet::interval(1.0, 4.0)),
        ("finite {I, diag(4,1)}", UncertaintySet::finite(vec![SymMat::identity(2), SymMat::diag(&[4.0, 1.0])])),
        (
            "finite 3x3",
            SymMat::new(3, vec![2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0])
                .and_then(|m| UncertaintySet::finite(vec![SymMat::identity(3), SymMat::diag(&[2.0, 1.0, 3.0]), m])),
        ),
    ];
    for (seed, (name, set)) in sets.into_iter().enumerate() {
        let g = GFunction::new(set.map_err(s)?).map_err(s)?;
        let r = check_axioms(&g, 1000, seed as u64).map_err(s)?;
        ensure(r.trials == 1000 && r.passed(), || format!("{name}: {} violations, zero exact {}", r.violations.len(), r.zero_is_exact))?;
    }
    let wall = clock.elapsed().as_secs_f64();
    ensure(wall < 1.0, || format!("runtime {wall:.3}s over 1s"))?;
    Ok(format!("3 sets x 1000 trials clean, {wall:.3}s"))
}

fn criterion_2(suite: &mut Suite) -> Outcome {
    let cases: [(&str, fn(f64, f64) -> f64); 2] =
        [("gheat_convex", |x, t| x * x + 4.0 * t), ("gheat_concave", |x, t| -x * x - t)];
    suite.load(&cases.map(|c| c.0))?;
    let mut detail = Vec::new();
    for (name, oracle) in cases {
        let r = report!(suite.get(name), GheatOracle);
        let sol = &r.solution;
        let slow = sol.spec.slow;
        ensure(slow.nodes == 401 && slow.lo == -3.0 && slow.hi == 3.0 && sol.spec.horizon == 0.5, || format!("{name}: grid differs"))?;
        let mut err: f64 = 0.0;
        for sl in &sol.slices {
            for i in sol.interior_slow(sl.step) {
                err = err.max((sl.values[i] - oracle(slow.x(i), sl.t)).abs());
            }
        }
        ensure(err <= 2e-3, || format!("{name}: sup error {err:e} over 2e-3"))?;
        detail.push(format!("{name} {err:.2e}"));
    }
    let wall = suite.wall(&cases.map(|c| c.0));
    ensure(wall < 10.0, || format!("runtime {wall:.2}s over 10s"))?;
    Ok(format!("{}, {wall:.2}s", detail.join(", ")))
}

/// Long-run average of `tanh(y) + 0.5` along `y' = −y`, by RK4.
fn deterministic_flow_average() -> f64 {
    let (dt, t_end, t_avg) = (1e-3, 80.0, 40.0);
    let f = |y: f64| -y;
    let b = |y: f64| y.tanh() + 0.5;
    let mut y = 2.0;
    let (mut sum, mut n) = (0.0, 0usize);
    let steps = (t_end / dt) as usize;
    for k in 0..steps {
        if k as f64 * dt >= t_avg {
            sum += b(y);
            n += 1;
        }
        let k1 = f(y);
        let k2 = f(y + 0.5 * dt * k1);
        let k3 = f(y + 0.5 * dt * k2);
        let k4 = f(y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    sum / n as f64
}

fn criterion_3(suite: &mut Suite) -> Outcome {
    suite.load(&["ergodic_tanh"])?;
    let run = suite.get("ergodic_tanh");
    let r = report!(run, Generator);
    let probe = r.probes.first().ok_or("no probe")?;
    let sample = &probe.sample;
    let oracle = deterministic_flow_average();
    let lam = sample.lambda_cesaro;
    ensure((lam - oracle).abs() <= 5e-3, || format!("lambda {lam} vs oracle {oracle}"))?;
    ensure(sample.per_start.len() == 3, || format!("{} starts", sample.per_start.len()))?;
    ensure(sample.xbar_spread <= 1e-3, || format!("start spread {:e}", sample.xbar_spread))?;
    let gap = (lam - probe.ladder.limit).abs();
    ensure(gap <= 5e-3, || format!("Cesaro vs discounted {gap:e}"))?;
    ensure(probe.rate.fit_slope.abs() <= 1e-3, || format!("residual slope {:e}", probe.rate.fit_slope))?;
    ensure(run.wall < 60.0, || format!("runtime {:.2}s over 60s", run.wall))?;
    Ok(format!(
        "lambda {lam:.6} (oracle {oracle:.6}), spread {:.1e}, discounted gap {gap:.1e}, slope {:.1e}, {:.2}s",
        sample.xbar_spread, probe.rate.fit_slope, run.wall
    ))
}

fn criterion_4(suite: &mut Suite) -> Outcome {
    suite.load(&["table_properties"])?;
    let run = suite.get("table_properties");
    let r = report!(run, Generator);
    let table = r.table.as_ref().ok_or("no table")?;
    let p = r.properties.as_ref().ok_or("no property report")?;
    ensure(table.n_directions() == 32, || format!("{} directions", table.n_directions()))?;
    let tol = 3.0 * table.max_tolerance();
    ensure(p.tolerance <= tol.max(1e-12) * (1.0 + 1e-12), || format!("property tolerance {} above 3x estimate {tol}", p.tolerance))?;
    ensure(p.subadditivity_excess <= tol, || format!("subadditivity excess {:e} over {tol:e}", p.subadditivity_excess))?;
    ensure(p.monotonicity_excess <= tol, || format!("monotonicity excess {:e} over {tol:e}", p.monotonicity_excess))?;

    let mut runner = TestRunner::deterministic();
    let strategy = (-2.0..2.0f64, 0.0..TAU, 0.01..10.0f64);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (x, theta, scale) = strategy.new_tree(&mut runner).map_err(s)?.current();
        let (dp, da) = (theta.cos(), theta.sin());
        let base = table.eval(x, dp, da).map_err(s)?;
        let scaled = table.eval(x, scale * dp, scale * da).map_err(s)?;
        worst = worst.max((scaled - scale * base).abs() / (scale * base).abs().max(1.0));
    }
    ensure(worst <= 1e-12, || format!("radial homogeneity error {worst:e}"))?;
    ensure(run.wall < 120.0, || format!("runtime {:.2}s over 120s", run.wall))?;
    Ok(format!(
        "subadditivity {:.1e}, monotonicity {:.1e} (allowed {tol:.1e}), homogeneity {worst:.1e}, {:.2}s",
        p.subadditivity_excess, p.monotonicity_excess, run.wall
    ))
}

/// Sup error and slice spread over `t ≥ t_min`, `|x| ≤ 1`, fast slices {−1, 0, 1}.
fn window_stats(sol: &GridSolution, t_min: f64, reference: impl Fn(usize, f64, usize) -> f64) -> Result<(f64, f64), String> {
    let js: Vec<usize> = [-1.0, 0.0, 1.0].iter().map(|y| sol.nearest_fast(*y)).collect();
    let (mut err, mut spread) = (0.0f64, 0.0f64);
    for (k, sl) in sol.slices.iter().enumerate() {
        if sl.t < t_min - 1e-12 {
            continue;
        }
        for i in 0..sol.spec.slow.nodes {
            if sol.spec.slow.x(i).abs() > 1.0 + 1e-9 {
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &j in &js {
                ensure(sol.is_interior(sl.step, i, j), || "window reaches the boundary zone".into())?;
                let v = sol.value(sl, i, j);
                err = err.max((v - reference(k, sl.t, i)).abs());
                lo = lo.min(v);
                hi = hi.max(v);
            }
            spread = spread.max(hi - lo);
        }
    }
    Ok((err, spread))
}

fn criterion_5(suite: &mut Suite) -> Outcome {
    suite.load(&["converge"])?;
    let run = suite.get("converge");
    let r = report!(run, Converge);
    let eps: Vec<f64> = r.rows.iter().map(|row| row.epsilon).collect();
    ensure(eps == [0.4, 0.2, 0.1, 0.05], || format!("ladder {eps:?}"))?;
    let av = &r.averaged_solution;
    let (mut errors, mut spreads) = (Vec::new(), Vec::new());
    for sol in &r.solutions {
        ensure(sol.slices.len() == av.slices.len(), || "slice layouts differ".into())?;
        let (e, sp) = window_stats(sol, 0.1, |k, t, i| {
            assert!((av.slices[k].t - t).abs() < 1e-12);
            av.slices[k].values[i]
        })?;
        errors.push(e);
        spreads.push(sp);
    }
    let xs = av.spec.slow.points();
    let phi: Vec<f64> = xs.iter().map(|x| x.tanh()).collect();
    let osc = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = *errors.last().unwrap();
    ensure(strictly_decreasing(&errors), || format!("errors {errors:?}"))?;
    ensure(strictly_decreasing(&spreads), || format!("spreads {spreads:?}"))?;
    ensure(last <= 0.02 * osc, || format!("final error {last} over {}", 0.02 * osc))?;
    ensure(run.wall <= 600.0, || format!("runtime {:.1}s over 600s", run.wall))?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/");
    Ok(format!("errors {} spreads {} (final limit {:.4}), {:.1}s", fmt(&errors), fmt(&spreads), 0.02 * osc, run.wall))
}

/// `max over r ∈ [lo, hi]` of `sin(2(x + r t))`, for `t ≥ 0`.
fn max_sin2(x: f64, t: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = (2.0 * (x + lo * t), 2.0 * (x + hi * t));
    let peak = FRAC_PI_2 + ((a - FRAC_PI_2) / TAU).ceil() * TAU;
    if peak <= b {
        1.0
    } else {
        a.sin().max(b.sin())
    }
}

fn criterion_6(suite: &mut Suite) -> Outcome {
    suite.load(&["maximal"])?;
    let run = suite.get("maximal");
    let r = report!(run, MaxOracle);
    let (lo, hi) = (r.mu_lo, r.mu_hi);
    ensure(lo < hi, || format!("drift bounds {lo} {hi}"))?;
    let av = &r.averaged_solution;
    let mut av_err: f64 = 0.0;
    for sl in &av.slices {
        if sl.t < 0.1 - 1e-12 {
            continue;
        }
        for i in av.interior_slow(sl.step) {
            let x = av.spec.slow.x(i);
            if x.abs() <= 1.0 + 1e-9 {
                av_err = av_err.max((sl.values[i] - max_sin2(x, sl.t, lo, hi)).abs());
            }
        }
    }
    let finest = r.solutions.last().ok_or("no two-scale solve")?;
    ensure(finest.epsilon == Some(0.05), || format!("finest epsilon {:?}", finest.epsilon))?;
    let slow = finest.spec.slow;
    let (eps_err, _) = window_stats(finest, 0.1, |_, t, i| max_sin2(slow.x(i), t, lo, hi))?;
    ensure(av_err <= 5e-3, || format!("averaged error {av_err:e} over 5e-3"))?;
    ensure(eps_err <= 0.05, || format!("epsilon 0.05 error {eps_err} over 0.05"))?;
    ensure(run.wall <= 300.0, || format!("runtime {:.1}s over 300s", run.wall))?;
    Ok(format!("mu [{lo:.4}, {hi:.4}], averaged {av_err:.2e}, eps 0.05 {eps_err:.4}, {:.1}s", run.wall))
}

fn criterion_7(suite: &mut Suite) -> Outcome {
    let names = ["contraction_deterministic", "contraction_ou"];
    suite.load(&names)?;
    let det = report!(suite.get(names[0]), Contraction);
    let mut worst: f64 = 0.0;
    for row in &det.rows {
        // y' = −y with η = 1 from −1 and 2.
        let oracle = (-2.0 * row.t).exp() * 9.0;
        worst = worst.max((row.mean_gap_sq - oracle).abs() / oracle);
    }
    ensure(det.rows.len() == 3, || format!("{} check times", det.rows.len()))?;
    ensure(worst <= 1e-3, || format!("deterministic relative error {worst:e}"))?;
    let ou = report!(suite.get(names[1]), Contraction);
    let ts: Vec<f64> = ou.rows.iter().map(|r| r.t).collect();
    ensure(ts == [0.5, 1.0, 2.0], || format!("check times {ts:?}"))?;
    ensure(ou.passes(), || format!("OU rows {:?}", ou.rows))?;
    let wall = suite.wall(&names);
    ensure(wall < 30.0, || format!("runtime {wall:.1}s over 30s"))?;
    Ok(format!("deterministic rel error {worst:.1e}, OU gated bound holds at {ts:?}, {wall:.2}s"))
}

fn criterion_8(suite: &mut Suite) -> Outcome {
    let names = ["khasminskii_frozen", "khasminskii"];
    suite.load(&names)?;
    let frozen = report!(suite.get(names[0]), Khasminskii);
    ensure(frozen.rows.iter().all(|r| r.gap == 0.0), || format!("frozen gaps {:?}", frozen.rows.iter().map(|r| r.gap).collect::<Vec<_>>()))?;
    let r = report!(suite.get(names[1]), Khasminskii);
    let eps: Vec<f64> = r.rows.iter().map(|row| row.epsilon).collect();
    ensure(eps == [0.2, 0.1, 0.05], || format!("ladder {eps:?}"))?;
    let x0: f64 = 0.5;
    for row in &r.rows {
        let e = row.epsilon;
        let delta = e * (1.0 / e).ln().powf(0.25);
        let k = delta / (e * e) + 1.0 / e;
        let rho = row.c_guess * k * delta * delta * (row.c_guess * k * delta).exp();
        let allowed = (1.0 + x0 * x0) * rho * 1.5;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        ensure(close(row.delta, delta) && close(row.rho, rho) && close(row.allowed, allowed), || {
            format!("eps {e}: gate ({}, {}, {}) vs ({delta}, {rho}, {allowed})", row.delta, row.rho, row.allowed)
        })?;
        ensure(row.gap <= allowed, || format!("eps {e}: gap {} over {allowed}", row.gap))?;
    }
    let gaps: Vec<f64> = r.rows.iter().map(|row| row.gap).collect();
    ensure(strictly_decreasing(&gaps), || format!("gaps {gaps:?}"))?;
    let wall = suite.wall(&names);
    ensure(wall < 60.0, || format!("runtime {wall:.1}s over 60s"))?;
    Ok(format!("frozen gap 0, gaps {gaps:.4?}, {wall:.1}s"))
}

fn criterion_9(suite: &mut Suite) -> Outcome {
    let mut values: Vec<(String, f64)> = Vec::new();
    let direct = |label: String, sol: &GridSolution| -> Result<(String, f64), String> {
        let delta = 10.min(sol.steps().saturating_sub(1)).max(1);
        Ok((label, dpp_check(sol, delta).map_err(s)?))
    };
    for (name, run) in &suite.runs {
        match &run.report {
            Report::GheatOracle(r) => values.push(direct(name.clone(), &r.solution)?),
            Report::Converge(r) => {
                values.push(direct(format!("{name} averaged"), &r.averaged_solution)?);
                for sol in &r.solutions {
                    values.push(direct(format!("{name} eps {:?}", sol.epsilon), sol)?);
                }
            }
            Report::MaxOracle(r) => {
                values.push(direct(format!("{name} averaged"), &r.averaged_solution)?);
                for sol in &r.solutions {
                    values.push(direct(format!("{name} eps {:?}", sol.epsilon), sol)?);
                }
            }
            Report::Findim(r) => {
                values.push((format!("{name} averaged"), r.averaged_dpp));
                values.extend(r.rows.iter().map(|row| (format!("{name} eps {}", row.epsilon), row.dpp)));
            }
            _ => {}
        }
    }
    ensure(!values.is_empty(), || "no stored solves".into())?;
    let worst = values.iter().cloned().fold((String::new(), 0.0), |m, v| if v.1 > m.1 { v } else { m });
    ensure(worst.1 <= 1e-12 && values.iter().all(|v| v.1.is_finite()), || format!("{}: {:e}", worst.0, worst.1))?;
    Ok(format!("{} solves, worst {:.1e}", values.len(), worst.1))
}

fn criterion_10(suite: &mut Suite) -> Outcome {
    let names = ["findim", "findim_b", "findim_a", "findim_nested_b", "findim_nested_a", "converge"];
    suite.load(&names)?;
    let main = report!(suite.get("findim"), Findim);
    let d: Vec<f64> = main.rows.iter().map(|r| r.discrepancy).collect();
    ensure(main.route == FindimRoute::Additive, || format!("route {:?}", main.route))?;
    ensure(strictly_decreasing(&d), || format!("discrepancies {d:?}"))?;

    let conv = report!(suite.get("converge"), Converge);
    let (t1, t2) = (main.t1, main.t2);
    ensure(conv.averaged_solution.spec.horizon == t2, || "converge horizon differs from t2".into())?;
    let mut worst: f64 = 0.0;
    for (name, at) in [("findim_b", t2), ("findim_a", t1), ("findim_nested_b", t2), ("findim_nested_a", t1)] {
        let f = report!(suite.get(name), Findim);
        let nested = name.contains("nested");
        ensure(matches!(f.route, FindimRoute::Nested { .. }) == nested, || format!("{name}: route {:?}", f.route))?;
        let av = conv.averaged_solution.slice_at(at).ok_or("no averaged slice at t")?;
        let mut w = max_abs_diff(&f.route_b, &av.values);
        for (row, a) in f.rows.iter().zip(&f.route_a) {
            let sol = conv.solutions.iter().find(|s| s.epsilon == Some(row.epsilon)).ok_or("epsilon missing from converge")?;
            let sl = sol.slice_at(at).ok_or("no two-scale slice at t")?;
            w = w.max(max_abs_diff(a, &sl.values));
        }
        ensure(w <= 1e-10, || format!("{name}: collapsed case differs from the direct solve by {w:e}"))?;
        worst = worst.max(w);
    }
    let wall = suite.wall(&names[..5]);
    ensure(wall <= 900.0, || format!("runtime {wall:.1}s over 900s"))?;
    Ok(format!("discrepancies {d:.4?}, collapsed cases within {worst:.1e}, {wall:.1}s"))
}

fn criterion_11(suite: &mut Suite) -> Outcome {
    let names: Vec<&str> = FIXTURES.iter().map(|f| f.0).collect();
    suite.load(&names)?;
    let mut compared = 0;
    for (name, text, kind) in FIXTURES {
        let base = render(&suite.get(name).report).map_err(s)?;
        let budgets: &[usize] = if suite.get(name).wall < 5.0 { &[2, 3] } else { &[2] };
        for &threads in budgets {
            let (rerun, _) = execute(text, *kind, threads)?;
            let again = render(&rerun).map_err(s)?;
            let paths = |v: &[gavg::output::Artifact]| v.iter().map(|a| a.path.clone()).collect::<Vec<_>>();
            ensure(paths(&base) == paths(&again), || format!("{name}: file lists differ at {threads} threads"))?;
            for (a, b) in base.iter().zip(&again) {
                ensure(a.bytes == b.bytes, || format!("{name}/{}: bytes differ at {threads} threads", a.path))?;
                compared += a.path.ends_with(".csv") as usize;
            }
        }
    }
    Ok(format!("{compared} CSV files identical across reruns at 1, 2 and 3 threads"))
}

fn main() -> ExitCode {
    type Criterion = fn(&mut Suite) -> Outcome;
    // 9 runs last so that it sees every cached solve.
    let order: [(usize, Criterion); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (10, criterion_10),
        (11, criterion_11),
        (9, criterion_9),
    ];
    let mut suite = Suite::default();
    let mut failed = 0;
    for (n, criterion) in order {
        match criterion(&mut suite) {
            Ok(detail) => println!("criterion {n}: PASS {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
