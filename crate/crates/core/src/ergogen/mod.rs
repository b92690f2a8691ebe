//! The averaged generator G̃: ergodic constants of the frozen fast problem by
//! a long-time (Cesàro) route and a discounted route, and their tabulation.
//!
//! For frozen x̃ and a direction (p, A), the fast PDE solved is
//! `∂_t w = G(σ̄² w'' + 2h̄ w' + 2q) + b̄ w' + p·b̃` with
//! `q = p·h̃ + σ̃² A / 2` and `w(0) = 0`; its growth rate is G̃(x̃, p, A).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fnpde::scheme1d::{solve_1d, NodeCoef, Scheme1D};
use crate::fnpde::{Axis, GridSolution, GridSpec, SolutionKind};
use crate::gcore::GFunction;
use crate::system::{CoefficientField, TwoScaleSystem};

mod table;

pub use table::{build_table, build_table_with, GeneratorTable, PropertyReport, TableOptions};

pub const DEFAULT_STARTS: [f64; 3] = [-2.0, 0.0, 2.0];
pub const DEFAULT_ALPHAS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Floor of the tolerance estimate; below it differences are rounding.
pub const TOLERANCE_FLOOR: f64 = 1e-9;

/// Relative residual accepted for a discounted stationary solve.
pub const STATIONARY_TOLERANCE: f64 = 1e-10;

/// The fast dynamics with the slow argument frozen, and a running-cost direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenFastProblem {
    pub x_tilde: f64,
    pub p: f64,
    pub a: f64,
    pub g: GFunction,
    pub eta: f64,
    b_tilde: CoefficientField,
    h_tilde: CoefficientField,
    sigma_tilde: CoefficientField,
    b_bar: CoefficientField,
    h_bar: CoefficientField,
    sigma_bar: CoefficientField,
}

impl FrozenFastProblem {
    pub fn new(sys: &TwoScaleSystem, x_tilde: f64, p: f64, a: f64) -> Result<Self> {
        sys.require_scalar()?;
        Ok(FrozenFastProblem {
            x_tilde,
            p,
            a,
            g: sys.g.clone(),
            eta: sys.eta_claimed,
            b_tilde: sys.b_tilde.clone(),
            h_tilde: sys.h_tilde.clone(),
            sigma_tilde: sys.sigma_tilde.clone(),
            b_bar: sys.b_bar.clone(),
            h_bar: sys.h_bar.clone(),
            sigma_bar: sys.sigma_bar.clone(),
        })
    }

    /// Coefficients of the fast PDE at `y`.
    pub fn coefficients(&self, y: f64) -> Result<NodeCoef> {
        let x = self.x_tilde;
        let sb = self.sigma_bar.eval1(x, y)?;
        let st = self.sigma_tilde.eval1(x, y)?;
        let q = self.p * self.h_tilde.eval1(x, y)? + 0.5 * st * st * self.a;
        Ok(NodeCoef {
            diffusion: sb * sb,
            first_in: 2.0 * self.h_bar.eval1(x, y)?,
            source_in: 2.0 * q,
            drift: self.b_bar.eval1(x, y)?,
            source_out: self.p * self.b_tilde.eval1(x, y)?,
        })
    }

    fn scheme(&self, axis: &Axis, kill: f64) -> Result<Scheme1D> {
        Scheme1D::new(axis, self.g.scalar_form()?, crate::fnpde::Boundary::Neumann, kill, |y| {
            self.coefficients(y)
        })
    }
}

/// One ergodic-constant estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSample {
    pub x_tilde: f64,
    pub p: f64,
    pub a: f64,
    pub lambda_cesaro: f64,
    /// Filled for the cross-checked subset.
    pub lambda_discounted: Option<f64>,
    /// `(t, m(t)/t)` with m averaged over the starting points.
    pub slope_history: Vec<(f64, f64)>,
    /// Slope estimates per starting point.
    pub per_start: Vec<f64>,
    pub xbar_spread: f64,
    pub tolerance_estimate: f64,
    /// Grid refinement part of the tolerance.
    pub grid_proxy: f64,
    /// Horizon part of the tolerance.
    pub horizon_proxy: f64,
}

/// 1-D grid for the fast variable: `[−5/√η − max|start|, 5/√η + max|start|]`
/// with spacing `h` (rounded so that 0 is a node and the count of cells per
/// side is even, which keeps a 2h grid nested).
pub fn fast_axis_spec(eta: f64, h: f64, starts: &[f64], horizon: f64) -> Result<GridSpec> {
    if !(eta > 0.0 && h > 0.0) {
        return Err(Error::invalid("eta and h must be positive"));
    }
    let reach = starts.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let half = 5.0 / libm::sqrt(eta) + reach;
    let cells = libm::ceil(half / (2.0 * h) - 1e-9).max(1.0) * 2.0;
    let axis = Axis::new(-cells * h, cells * h, 2 * cells as usize + 1)?;
    let mut spec = GridSpec::new(axis, None, horizon, 0)?;
    spec.snapshots = 40;
    Ok(spec)
}

fn coarsen(spec: &GridSpec) -> Result<GridSpec> {
    let ax = spec.slow;
    let nodes = (ax.nodes - 1) / 2 + 1;
    let mut c = spec.clone();
    c.slow = Axis::new(ax.lo, ax.hi, nodes)?;
    Ok(c)
}

fn at(sol: &GridSolution, values: &[f64], y: f64) -> Result<f64> {
    let (i, w) = sol.spec.slow.locate(y).ok_or_else(|| Error::invalid(format!("start {y} outside the fast grid")))?;
    Ok(values[i] + w * (values[i + 1] - values[i]))
}

struct CesaroRun {
    per_start: Vec<f64>,
    /// The same estimator on `[T/4, T/2]`.
    per_start_half: Vec<f64>,
    history: Vec<(f64, f64)>,
}

fn cesaro_run(fp: &FrozenFastProblem, spec: &GridSpec, starts: &[f64]) -> Result<CesaroRun> {
    let scheme = fp.scheme(&spec.slow, 0.0)?;
    let init = alloc::vec![0.0; spec.slow.nodes];
    let sol = solve_1d(spec, SolutionKind::Fast, scheme, init)?;
    let horizon = spec.horizon;
    let missing = || Error::invalid("snapshot count must be a multiple of 4");
    let half = sol.slice_at(0.5 * horizon).ok_or_else(missing)?;
    let quarter = sol.slice_at(0.25 * horizon).ok_or_else(missing)?;
    let last = sol.last();
    let mut per_start = Vec::with_capacity(starts.len());
    let mut per_start_half = Vec::with_capacity(starts.len());
    for &y in starts {
        let w_t = at(&sol, &last.values, y)?;
        let w_h = at(&sol, &half.values, y)?;
        let w_q = at(&sol, &quarter.values, y)?;
        per_start.push((w_t - w_h) / (0.5 * horizon));
        per_start_half.push((w_h - w_q) / (0.25 * horizon));
    }
    let mut history = Vec::with_capacity(sol.slices.len());
    for s in sol.slices.iter().skip(1) {
        let mut m = 0.0;
        for &y in starts {
            m += at(&sol, &s.values, y)?;
        }
        history.push((s.t, m / starts.len() as f64 / s.t));
    }
    Ok(CesaroRun { per_start, per_start_half, history })
}

/// Long-time slope `(w(T) − w(T/2)) / (T/2)` at each start, on `spec.slow`
/// taken as the fast-variable axis. The tolerance is the larger of the change
/// under one grid coarsening and twice the change of the slope estimate
/// between horizons T/2 and T.
pub fn cesaro_lambda(fp: &FrozenFastProblem, horizon: f64, spec: &GridSpec, starts: &[f64]) -> Result<GeneratorSample> {
    if starts.is_empty() {
        return Err(Error::invalid("at least one starting point is needed"));
    }
    if horizon < 10.0 / fp.eta {
        return Err(Error::invalid(format!("horizon {horizon} is below 10/eta = {}", 10.0 / fp.eta)));
    }
    let mut spec = spec.clone();
    spec.horizon = horizon;
    spec.snapshots = spec.snapshots.div_ceil(4) * 4;
    let fine = cesaro_run(fp, &spec, starts)?;
    let coarse = cesaro_run(fp, &coarsen(&spec)?, starts)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let lambda = mean(&fine.per_start);
    let spread = fine.per_start.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
        - fine.per_start.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let grid_proxy = (lambda - mean(&coarse.per_start)).abs();
    // Slope estimate at T against the same estimate at T/2, worst start.
    let horizon_proxy = 2.0
        * fine.per_start.iter().zip(&fine.per_start_half).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let tolerance = grid_proxy.max(horizon_proxy).max(TOLERANCE_FLOOR);
    if spread > 10.0 * tolerance {
        return Err(Error::Gate(format!(
            "start spread {spread:.3e} exceeds 10 x tolerance {tolerance:.3e}; the fast dynamics may not be dissipative"
        )));
    }
    Ok(GeneratorSample {
        x_tilde: fp.x_tilde,
        p: fp.p,
        a: fp.a,
        lambda_cesaro: lambda,
        lambda_discounted: None,
        slope_history: fine.history,
        per_start: fine.per_start,
        xbar_spread: spread,
        tolerance_estimate: tolerance,
        grid_proxy,
        horizon_proxy,
    })
}

/// Discounted values `α v^α(0)` along a ladder and their extrapolation to α = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedLadder {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    /// Policy iterations per rung.
    pub iterations: Vec<usize>,
    /// Stationary residual per rung.
    pub residuals: Vec<f64>,
    pub limit: f64,
}

/// Policy-iteration cap for one discounted solve.
pub const MAX_POLICY_ITERATIONS: usize = 500;

/// Stationary discounted solve `G(...) + b̄ v' + p·b̃ − α v = 0` on the
/// scheme's grid; returns `α v(0)`, the iteration count and the residual.
fn discounted_at(fp: &FrozenFastProblem, axis: &Axis, alpha: f64) -> Result<(f64, usize, f64)> {
    let scheme = fp.scheme(axis, alpha)?;
    let (v, iters) = scheme.solve_stationary(MAX_POLICY_ITERATIONS, STATIONARY_TOLERANCE)?;
    let residual = scheme.stationary_residual(&v);
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if !(residual <= STATIONARY_TOLERANCE * alpha * scale) {
        return Err(Error::NotConverged { alpha, steps: iters });
    }
    let (i, w) = axis.locate(0.0).ok_or_else(|| Error::invalid("0 outside the fast grid"))?;
    Ok((alpha * (v[i] + w * (v[i + 1] - v[i])), iters, residual))
}

pub fn discounted_ladder(fp: &FrozenFastProblem, alpha_ladder: &[f64], spec: &GridSpec) -> Result<DiscountedLadder> {
    if alpha_ladder.is_empty() || alpha_ladder.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::invalid("alpha ladder must be nonempty and positive"));
    }
    if alpha_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("alpha ladder must be strictly decreasing"));
    }
    let mut values = Vec::with_capacity(alpha_ladder.len());
    let mut iterations = Vec::with_capacity(alpha_ladder.len());
    let mut residuals = Vec::with_capacity(alpha_ladder.len());
    for &a in alpha_ladder {
        let (v, n, r) = discounted_at(fp, &spec.slow, a)?;
        values.push(v);
        iterations.push(n);
        residuals.push(r);
    }
    let limit = extrapolate_to_zero(alpha_ladder, &values);
    Ok(DiscountedLadder { alphas: alpha_ladder.to_vec(), values, iterations, residuals, limit })
}

/// Richardson-style limit of `α v^α(0)` as α → 0.
pub fn discounted_lambda(fp: &FrozenFastProblem, alpha_ladder: &[f64], spec: &GridSpec) -> Result<f64> {
    Ok(discounted_ladder(fp, alpha_ladder, spec)?.limit)
}

/// Neville extrapolation of the interpolating polynomial through the last
/// (up to three) ladder points, evaluated at zero.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let k = n.min(3);
    let xs = &xs[n - k..];
    let mut p: Vec<f64> = ys[n - k..].to_vec();
    for level in 1..k {
        for i in 0..k - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

/// Boundedness of `|m(t) − λt|` over the second half of the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    /// Least-squares slope of the residual against t.
    pub fit_slope: f64,
    pub max_residual: f64,
    pub bounded: bool,
}

pub fn rate_bound_check(sample: &GeneratorSample) -> Result<RateReport> {
    let hist = &sample.slope_history;
    let t_end = hist.last().ok_or_else(|| Error::invalid("slope history is empty"))?.0;
    let pts: Vec<(f64, f64)> = hist
        .iter()
        .filter(|(t, _)| *t >= 0.5 * t_end - 1e-12)
        .map(|(t, s)| (*t, (t * s - sample.lambda_cesaro * t).abs()))
        .collect();
    let n = pts.len() as f64;
    let (mt, mr) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mr)).sum();
    let fit_slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let max_residual = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let bounded = fit_slope.abs() <= sample.tolerance_estimate.max(1e-3);
    Ok(RateReport { fit_slope, max_residual, bounded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SystemSource;

    fn sys(b_tilde: &str, sigma_bar: &str) -> TwoScaleSystem {
        SystemSource::scalar(b_tilde, "-y1", "1", sigma_bar, "x1")
            .constants(1.0, 1.0, 1.5)
            .build(GFunction::interval(1.0, 4.0).unwrap())
            .unwrap()
    }

    fn spec() -> GridSpec {
        fast_axis_spec(1.0, 0.05, &DEFAULT_STARTS, 10.0).unwrap()
    }

    #[test]
    fn constant_cost_gives_constant_rate() {
        let fp = FrozenFastProblem::new(&sys("0.7", "0.5"), 0.0, 1.0, 0.0).unwrap();
        let s = cesaro_lambda(&fp, 10.0, &spec(), &DEFAULT_STARTS).unwrap();
        assert!((s.lambda_cesaro - 0.7).abs() < 1e-12);
        let r = rate_bound_check(&s).unwrap();
        assert!(r.max_residual < 1e-10 && r.bounded);
        let d = discounted_ladder(&fp, &DEFAULT_ALPHAS, &spec()).unwrap();
        for v in &d.values {
            assert!((v - 0.7).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn zero_cost_gives_zero() {
        let fp = FrozenFastProblem::new(&sys("tanh(y1)", "0.5"), 0.0, 0.0, 0.0).unwrap();
        let s = cesaro_lambda(&fp, 10.0, &spec(), &DEFAULT_STARTS).unwrap();
        assert_eq!(s.lambda_cesaro, 0.0);
        assert_eq!(discounted_lambda(&fp, &DEFAULT_ALPHAS, &spec()).unwrap(), 0.0);
    }

    #[test]
    fn short_horizon_rejected() {
        let fp = FrozenFastProblem::new(&sys("0.7", "0.5"), 0.0, 1.0, 0.0).unwrap();
        assert!(cesaro_lambda(&fp, 5.0, &spec(), &DEFAULT_STARTS).is_err());
    }

    #[test]
    fn neville_recovers_polynomials() {
        let xs = [0.2, 0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|a| 0.5 + 2.0 * a - 3.0 * a * a).collect();
        assert!((extrapolate_to_zero(&xs, &ys) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn anti_dissipative_residual_grows() {
        let history: Vec<(f64, f64)> = (1..=40).map(|k| {
            let t = k as f64;
            (t, (0.5 * t + 0.1 * t * t) / t)
        }).collect();
        let s = GeneratorSample {
            x_tilde: 0.0,
            p: 1.0,
            a: 0.0,
            lambda_cesaro: 0.5,
            lambda_discounted: None,
            slope_history: history,
            per_start: alloc::vec![0.5],
            xbar_spread: 0.0,
            tolerance_estimate: 1e-6,
            grid_proxy: 0.0,
            horizon_proxy: 0.0,
        };
        assert!(!rate_bound_check(&s).unwrap().bounded);
    }
}
