//! Scenario simulation: Euler–Maruyama paths of the two-scale system under a
//! fixed volatility control. Each control picks one classical measure, so
//! sample means bound the robust expectation from below.
//!
//! Path `k` draws its Gaussians from ChaCha8 stream `k` of the batch seed,
//! which makes batches independent of the worker count.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::gcore::{GFunction, SymMat};
use crate::par;
use crate::system::{audit_hypotheses, SampleBox, TwoScaleSystem};

mod khasminskii;
mod moments;

pub use khasminskii::{delta_m, khasminskii_freeze, rho_m, FrozenBatch};
pub use moments::{moment_probe, time_rescaling_check, MomentReport, MomentRow, RescalingReport};

/// A volatility control `γ_t` valued in the uncertainty set.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlPolicy {
    Constant(f64),
    /// `values[k]` on `[times[k], times[k+1])`; `times[0] == 0`.
    Schedule { times: Vec<f64>, values: Vec<f64> },
    /// `hi` where `switch(x̃, x̄) ≥ 0`, `lo` elsewhere.
    BangBang { switch: Expr, lo: f64, hi: f64 },
}

impl ControlPolicy {
    /// Checks every control value against the uncertainty set of `g`.
    pub fn validate(&self, g: &GFunction) -> Result<()> {
        let values: Vec<f64> = match self {
            ControlPolicy::Constant(v) => alloc::vec![*v],
            ControlPolicy::Schedule { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::invalid("schedule needs one value per breakpoint"));
                }
                if times[0] != 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::invalid("schedule breakpoints must start at 0 and increase"));
                }
                values.clone()
            }
            ControlPolicy::BangBang { switch, lo, hi } => {
                if !switch.fits(1, 1) {
                    return Err(Error::invalid("switching functional may use x1 and y1 only"));
                }
                alloc::vec![*lo, *hi]
            }
        };
        for v in values {
            if !(v.is_finite() && g.set().contains(&SymMat::scalar(v))) {
                return Err(Error::invalid(format!("control value {v} lies outside the uncertainty set")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn gamma(&self, t: f64, x: f64, y: f64) -> f64 {
        match self {
            ControlPolicy::Constant(v) => *v,
            ControlPolicy::Schedule { times, values } => {
                let k = times.partition_point(|s| *s <= t).max(1) - 1;
                values[k]
            }
            ControlPolicy::BangBang { switch, lo, hi } => {
                if switch.eval(&[x], &[y]) >= 0.0 {
                    *hi
                } else {
                    *lo
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ControlPolicy::Constant(v) => format!("constant({v})"),
            ControlPolicy::Schedule { times, values } => format!("schedule({} pieces)", times.len().min(values.len())),
            ControlPolicy::BangBang { switch, lo, hi } => format!("bangbang({switch}; {lo}, {hi})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub n_paths: usize,
    pub dt_sim: f64,
    pub horizon: f64,
    pub seed: u64,
    pub x0: f64,
    pub y0: f64,
    /// Store every `record_every`-th step (the last step is always stored).
    pub record_every: usize,
}

impl SimSettings {
    pub fn new(n_paths: usize, dt_sim: f64, horizon: f64, seed: u64) -> Self {
        SimSettings { n_paths, dt_sim, horizon, seed, x0: 0.0, y0: 0.0, record_every: 1 }
    }

    pub fn start(mut self, x0: f64, y0: f64) -> Self {
        self.x0 = x0;
        self.y0 = y0;
        self
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    pub fn steps(&self) -> usize {
        libm::ceil(self.horizon / self.dt_sim - 1e-9).max(1.0) as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be positive"));
        }
        if !(self.dt_sim > 0.0 && self.horizon > 0.0 && self.dt_sim <= self.horizon) {
            return Err(Error::invalid("need 0 < dt_sim <= horizon"));
        }
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return Err(Error::invalid("start must be finite"));
        }
        Ok(())
    }

    /// Step indices that are stored.
    pub fn recorded_steps(&self) -> Vec<usize> {
        let n = self.steps();
        let mut v: Vec<usize> = (0..=n).step_by(self.record_every).collect();
        if *v.last().unwrap_or(&0) != n {
            v.push(n);
        }
        v
    }

    /// Time of step `s`; the last step lands on the horizon.
    pub fn time(&self, s: usize) -> f64 {
        let n = self.steps();
        if s == n {
            self.horizon
        } else {
            self.horizon * s as f64 / n as f64
        }
    }
}

/// Simulated paths; `paths[k][r]` is `(X̃, X̄)` at `times[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBatch {
    pub sys: TwoScaleSystem,
    pub policy: ControlPolicy,
    pub settings: SimSettings,
    pub times: Vec<f64>,
    pub paths: Vec<Vec<(f64, f64)>>,
    /// ChaCha8 stream id of each path.
    pub rng_streams: Vec<u64>,
    /// Guard value `ε / (10·L_b̄)` the step was checked against.
    pub dt_guard: f64,
}

/// Mean and standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

impl ScenarioBatch {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Mean and standard error of `f(X̃_T, X̄_T)`.
    pub fn terminal_mean(&self, f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
        let v: Vec<f64> = self.paths.iter().map(|p| {
            let (x, y) = p[p.len() - 1];
            f(x, y)
        }).collect();
        mean_se(&v)
    }

    /// Mean and standard error of `φ(X̃_T)` with the system's terminal function.
    pub fn phi_mean(&self) -> (f64, f64) {
        self.terminal_mean(|x, _| self.sys.phi.eval(&[x], &[]))
    }

    /// Sample mean against a robust value: `mean ≤ value + 3·SE + grid_tol`.
    pub fn lower_bound_check(&self, robust_value: f64, grid_tol: f64) -> LowerBoundReport {
        let (mean, se) = self.phi_mean();
        LowerBoundReport { mean, se, robust_value, grid_tol, holds: mean <= robust_value + 3.0 * se + grid_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundReport {
    pub mean: f64,
    pub se: f64,
    pub robust_value: f64,
    pub grid_tol: f64,
    pub holds: bool,
}

/// The simulation box used for the hypothesis audit of a batch.
fn audit_box(sys: &TwoScaleSystem, st: &SimSettings) -> SampleBox {
    let r = 5.0 / libm::sqrt(sys.eta_claimed.max(1e-3));
    SampleBox { slow: (st.x0 - 5.0, st.x0 + 5.0), fast: (st.y0.min(0.0) - r, st.y0.max(0.0) + r) }
}

/// Largest stable Euler step for the fast drift, `ε / (10·L_b̄)`.
pub fn stiffness_guard(sys: &TwoScaleSystem, st: &SimSettings) -> Result<f64> {
    let report = audit_hypotheses(sys, audit_box(sys, st), 200, st.seed)?;
    // Dissipativity is not needed for the paths to exist; it is gated where used.
    if !(report.lipschitz.passes() && report.growth.passes()) {
        return Err(Error::Gate("Lipschitz or growth audit failed".into()));
    }
    let lip = report.fast_drift_lip;
    Ok(if lip > 0.0 { sys.epsilon / (10.0 * lip) } else { f64::INFINITY })
}

/// One Euler step of the fast equation at scale `eps`.
#[inline]
pub(crate) fn fast_step(sys: &TwoScaleSystem, x: f64, y: f64, gamma: f64, dt: f64, dw: f64, eps: f64) -> Result<f64> {
    let bb = sys.b_bar.eval1(x, y)?;
    let hb = sys.h_bar.eval1(x, y)?;
    let sb = sys.sigma_bar.eval1(x, y)?;
    Ok(y + (bb + hb * gamma) * dt / eps + sb * dw / libm::sqrt(eps))
}

/// One Euler step of the slow equation.
#[inline]
pub(crate) fn slow_step(sys: &TwoScaleSystem, x: f64, y: f64, gamma: f64, dt: f64, dw: f64) -> Result<f64> {
    let bt = sys.b_tilde.eval1(x, y)?;
    let ht = sys.h_tilde.eval1(x, y)?;
    let st = sys.sigma_tilde.eval1(x, y)?;
    Ok(x + (bt + ht * gamma) * dt + st * dw)
}

/// Gaussian source of path `k`.
pub(crate) fn path_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

#[inline]
pub(crate) fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn simulate_path(sys: &TwoScaleSystem, policy: &ControlPolicy, st: &SimSettings, k: usize) -> Result<Vec<(f64, f64)>> {
    let n = st.steps();
    let dt = st.horizon / n as f64;
    let sq = libm::sqrt(dt);
    let mut rng = path_rng(st.seed, k);
    let (mut x, mut y) = (st.x0, st.y0);
    let mut rec = Vec::with_capacity(n / st.record_every + 2);
    rec.push((x, y));
    for s in 1..=n {
        let t = st.time(s - 1);
        let gamma = policy.gamma(t, x, y);
        let dw = libm::sqrt(gamma) * sq * normal(&mut rng);
        let xn = slow_step(sys, x, y, gamma, dt, dw)?;
        let yn = fast_step(sys, x, y, gamma, dt, dw, sys.epsilon)?;
        if !(xn.is_finite() && yn.is_finite()) {
            return Err(Error::NonFiniteState { path: k, step: s });
        }
        (x, y) = (xn, yn);
        if s % st.record_every == 0 || s == n {
            rec.push((x, y));
        }
    }
    Ok(rec)
}

/// Euler–Maruyama paths under `policy`: increments `√γ·√dt·Z` through σ̃ and
/// `σ̄/√ε`, and `γ·dt` through the h-terms.
pub fn simulate(sys: &TwoScaleSystem, policy: &ControlPolicy, st: &SimSettings) -> Result<ScenarioBatch> {
    sys.require_scalar()?;
    st.validate()?;
    policy.validate(&sys.g)?;
    let guard = stiffness_guard(sys, st)?;
    let dt = st.horizon / st.steps() as f64;
    if dt > guard {
        return Err(Error::Gate(format!("dt_sim {dt:.3e} exceeds the stiffness guard {guard:.3e}")));
    }
    let paths = par::map_indexed(st.n_paths, |k| simulate_path(sys, policy, st, k));
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ScenarioBatch {
        sys: sys.clone(),
        policy: policy.clone(),
        settings: *st,
        times: st.recorded_steps().into_iter().map(|s| st.time(s)).collect(),
        paths,
        rng_streams: (0..st.n_paths as u64).collect(),
        dt_guard: guard,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionRow {
    pub t: f64,
    pub mean_gap_sq: f64,
    pub se: f64,
    /// `exp(−2ηt)·|x̄_a − x̄_b|²`.
    pub bound: f64,
    /// `bound·(1 + 3·SE/mean + euler_tol)`.
    pub allowed: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub x_tilde: f64,
    pub eta: f64,
    pub euler_tol: f64,
    pub rows: Vec<ContractionRow>,
}

impl ContractionReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.passes)
    }
}

/// Relative Euler tolerance of the contraction gate.
pub const EULER_TOLERANCE: f64 = 1e-3;

/// Couples two frozen fast paths (unit time scale, slow argument `x_tilde`)
/// through shared noise and compares `E|X̄^a_t − X̄^b_t|²` with `e^{−2ηt}|a − b|²`.
#[allow(clippy::too_many_arguments)]
pub fn contraction_test(
    sys: &TwoScaleSystem,
    policy: &ControlPolicy,
    x_tilde: f64,
    ya: f64,
    yb: f64,
    t_checks: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<ContractionReport> {
    sys.require_scalar()?;
    policy.validate(&sys.g)?;
    let r = 5.0 / libm::sqrt(sys.eta_claimed.max(1e-3));
    let bx = SampleBox { slow: (x_tilde, x_tilde + 1e-9), fast: (ya.min(yb).min(0.0) - r, ya.max(yb).max(0.0) + r) };
    if !audit_hypotheses(sys, bx, 200, seed)?.dissipativity.passes() {
        return Err(Error::Gate("dissipativity audit failed".into()));
    }
    if !(dt > 0.0) || n_paths == 0 {
        return Err(Error::invalid("need dt > 0 and at least one path"));
    }
    if t_checks.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("check times must be nonnegative"));
    }
    let t_max = t_checks.iter().fold(0.0f64, |m, t| m.max(*t));
    let n = libm::ceil(t_max / dt - 1e-9) as usize;
    let step_of = |t: f64| libm::ceil(t / dt - 1e-9) as usize;
    let gaps = par::map_indexed(n_paths, |k| -> Result<Vec<f64>> {
        let mut rng = path_rng(seed, k);
        let sq = libm::sqrt(dt);
        let (mut a, mut b) = (ya, yb);
        let mut out = Vec::with_capacity(n + 1);
        out.push((a - b) * (a - b));
        for s in 1..=n {
            let t = (s - 1) as f64 * dt;
            let gamma = policy.gamma(t, x_tilde, a);
            let dw = libm::sqrt(gamma) * sq * normal(&mut rng);
            a = fast_step(sys, x_tilde, a, gamma, dt, dw, 1.0)?;
            b = fast_step(sys, x_tilde, b, gamma, dt, dw, 1.0)?;
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::NonFiniteState { path: k, step: s });
            }
            out.push((a - b) * (a - b));
        }
        Ok(out)
    });
    let gaps = gaps.into_iter().collect::<Result<Vec<_>>>()?;
    let eta = sys.eta_claimed;
    let d0 = (ya - yb) * (ya - yb);
    let rows = t_checks
        .iter()
        .map(|&t| {
            let s = step_of(t);
            let v: Vec<f64> = gaps.iter().map(|g| g[s]).collect();
            let (mean, se) = mean_se(&v);
            let bound = libm::exp(-2.0 * eta * t) * d0;
            let rel = if mean > 0.0 { 3.0 * se / mean } else { 0.0 };
            let allowed = bound * (1.0 + rel + EULER_TOLERANCE);
            ContractionRow { t, mean_gap_sq: mean, se, bound, allowed, passes: mean <= allowed }
        })
        .collect();
    Ok(ContractionReport { x_tilde, eta, euler_tol: EULER_TOLERANCE, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::system::SystemSource;

    fn g() -> GFunction {
        GFunction::interval(1.0, 4.0).unwrap()
    }

    fn ou(sigma_bar: &str) -> TwoScaleSystem {
        SystemSource::scalar("0", "-y1", "0", sigma_bar, "x1").epsilon(0.1).build(g()).unwrap()
    }

    #[test]
    fn zero_coefficients_keep_paths_constant() {
        let sys = SystemSource::scalar("0", "0", "0", "0", "x1").build(g()).unwrap();
        let st = SimSettings::new(8, 0.01, 0.5, 1).start(0.3, -0.2);
        let b = simulate(&sys, &ControlPolicy::Constant(2.0), &st).unwrap();
        for p in &b.paths {
            assert!(p.iter().all(|s| *s == (0.3, -0.2)));
        }
    }

    #[test]
    fn deterministic_fast_decay() {
        let sys = ou("0");
        let st = SimSettings::new(2, 1e-4, 0.5, 1).start(0.0, 1.0).record_every(100);
        let b = simulate(&sys, &ControlPolicy::Constant(1.0), &st).unwrap();
        let (_, y) = *b.paths[0].last().unwrap();
        assert!((y - libm::exp(-5.0)).abs() < 1e-4, "{y}");
    }

    #[test]
    fn batches_are_reproducible_and_stream_separated() {
        let sys = ou("0.5");
        let st = SimSettings::new(6, 0.005, 0.2, 9);
        let a = simulate(&sys, &ControlPolicy::Constant(2.0), &st).unwrap();
        let b = simulate(&sys, &ControlPolicy::Constant(2.0), &st).unwrap();
        assert_eq!(a.paths, b.paths);
        assert_ne!(a.paths[0], a.paths[1]);
    }

    #[test]
    fn stiffness_guard_enforced() {
        let st = SimSettings::new(1, 0.05, 0.5, 0);
        assert!(matches!(simulate(&ou("0.5"), &ControlPolicy::Constant(1.0), &st), Err(Error::Gate(_))));
    }

    #[test]
    fn controls_validated() {
        assert!(ControlPolicy::Constant(5.0).validate(&g()).is_err());
        let s = ControlPolicy::Schedule { times: alloc::vec![0.0, 0.5], values: alloc::vec![1.0, 4.0] };
        assert!(s.validate(&g()).is_ok());
        assert_eq!(s.gamma(0.7, 0.0, 0.0), 4.0);
        let bb = ControlPolicy::BangBang { switch: parse_expr("y1", 1, 1).unwrap(), lo: 1.0, hi: 4.0 };
        assert_eq!(bb.gamma(0.0, 0.0, -1.0), 1.0);
    }

    #[test]
    fn deterministic_contraction_is_sharp() {
        let r = contraction_test(&ou("0"), &ControlPolicy::Constant(1.0), 0.0, 1.0, 3.0, &[0.0, 1.0], 4, 1e-3, 0).unwrap();
        assert_eq!(r.rows[0].mean_gap_sq, 4.0);
        assert!((r.rows[1].mean_gap_sq - 4.0 * libm::exp(-2.0)).abs() < 1e-3);
        assert!(r.passes());
    }
}
