//! Explicit monotone scheme for one-dimensional equations
//! `∂_t u = G(a u'' + c u' + s_in) + b u' + s_out − α u`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{march, Axis, Boundary, Diagnostics, GridSolution, GridSpec, SolutionKind, Stepper};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::gcore::{GFunction, ScalarG};

/// Pointwise coefficients of a 1-D equation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeCoef {
    /// Second-order coefficient inside G.
    pub diffusion: f64,
    /// First-order coefficient inside G.
    pub first_in: f64,
    /// Source inside G.
    pub source_in: f64,
    /// Drift outside G.
    pub drift: f64,
    /// Source outside G.
    pub source_out: f64,
}

#[derive(Debug, Clone)]
pub struct Scheme1D {
    g: ScalarG,
    boundary: Boundary,
    kill: f64,
    wp: Vec<f64>,
    wm: Vec<f64>,
    dp: Vec<f64>,
    dm: Vec<f64>,
    src_in: Vec<f64>,
    src_out: Vec<f64>,
    rate: f64,
    dt: f64,
}

impl Scheme1D {
    pub fn new(
        axis: &Axis,
        g: ScalarG,
        boundary: Boundary,
        kill: f64,
        mut coef: impl FnMut(f64) -> Result<NodeCoef>,
    ) -> Result<Self> {
        if kill < 0.0 {
            return Err(Error::invalid("killing rate must be nonnegative"));
        }
        let h = axis.h();
        let n = axis.nodes;
        let mut s = Scheme1D {
            g,
            boundary,
            kill,
            wp: Vec::with_capacity(n),
            wm: Vec::with_capacity(n),
            dp: Vec::with_capacity(n),
            dm: Vec::with_capacity(n),
            src_in: Vec::with_capacity(n),
            src_out: Vec::with_capacity(n),
            rate: 0.0,
            dt: 0.0,
        };
        let cap = 2.0 * g.half_hi;
        for i in 0..n {
            let c = coef(axis.x(i))?;
            if c.diffusion < 0.0 {
                return Err(Error::invalid("diffusion coefficient must be nonnegative"));
            }
            let diff = c.diffusion / (h * h);
            let (up, um) = upwind(c.first_in, h);
            let (bp, bm) = upwind(c.drift, h);
            s.wp.push(diff + up);
            s.wm.push(diff + um);
            s.dp.push(bp);
            s.dm.push(bm);
            s.src_in.push(c.source_in);
            s.src_out.push(c.source_out);
            let rate = 0.5 * cap * (2.0 * diff + up + um) + bp + bm + kill;
            s.rate = s.rate.max(rate);
        }
        Ok(s)
    }

    /// Stability limit `0.9 / max rate`.
    pub fn dt_max(&self) -> f64 {
        if self.rate > 0.0 {
            0.9 / self.rate
        } else {
            f64::INFINITY
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Stationary solution of the scheme, `G(M_i) + D_i − α v_i = 0` at every
    /// node, by policy iteration over the two extreme volatilities. Needs a
    /// positive killing rate and Neumann ghosts. Stops when the policy is
    /// stable or the residual is at most `rel_tol · α · max(1, max|v|)`.
    /// Returns `(v, iterations)`.
    pub fn solve_stationary(&self, max_iter: usize, rel_tol: f64) -> Result<(Vec<f64>, usize)> {
        if !(self.kill > 0.0) {
            return Err(Error::invalid("stationary solve needs a positive killing rate"));
        }
        if self.boundary != Boundary::Neumann {
            return Err(Error::Unsupported("stationary solves use Neumann ghosts".into()));
        }
        let n = self.wp.len();
        let mut upper = alloc::vec![true; n];
        let mut v = alloc::vec![0.0; n];
        let (mut lo, mut di, mut up, mut rhs) =
            (alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n]);
        for it in 1..=max_iter {
            for i in 0..n {
                let half = if upper[i] { self.g.half_hi } else { self.g.half_lo };
                let l = if i > 0 { half * self.wm[i] + self.dm[i] } else { 0.0 };
                let r = if i + 1 < n { half * self.wp[i] + self.dp[i] } else { 0.0 };
                lo[i] = -l;
                up[i] = -r;
                di[i] = self.kill + l + r;
                rhs[i] = half * self.src_in[i] + self.src_out[i];
            }
            thomas(&lo, &mut di, &up, &mut rhs);
            v.copy_from_slice(&rhs);
            let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if self.stationary_residual(&v) <= rel_tol * self.kill * scale {
                return Ok((v, it));
            }
            let mut changed = false;
            for i in 0..n {
                let (l, r) = neighbours(self.boundary, &v, i);
                let m = self.wp[i] * (r - v[i]) + self.wm[i] * (l - v[i]) + self.src_in[i];
                // Ties keep the current choice so the iteration terminates.
                let want = if m > 0.0 { true } else if m < 0.0 { false } else { upper[i] };
                if want != upper[i] {
                    upper[i] = want;
                    changed = true;
                }
            }
            if !changed {
                return Ok((v, it));
            }
        }
        Err(Error::NotConverged { alpha: self.kill, steps: max_iter })
    }

    /// Largest `|G(M_i) + D_i − α v_i|` over the nodes.
    pub fn stationary_residual(&self, v: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..v.len() {
            let (l, r) = neighbours(self.boundary, v, i);
            let (dl, dr) = (l - v[i], r - v[i]);
            let m = self.wp[i] * dr + self.wm[i] * dl + self.src_in[i];
            let d = self.dp[i] * dr + self.dm[i] * dl + self.src_out[i] - self.kill * v[i];
            worst = worst.max((self.g.apply(m) + d).abs());
        }
        worst
    }
}

/// Tridiagonal solve in place; `rhs` receives the solution. Needs diagonal dominance.
fn thomas(lo: &[f64], di: &mut [f64], up: &[f64], rhs: &mut [f64]) {
    let n = di.len();
    for i in 1..n {
        let w = lo[i] / di[i - 1];
        di[i] -= w * up[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= di[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
    }
}

/// Left and right neighbours of node `i`, with ghost values at the ends.
#[inline]
pub(super) fn neighbours(boundary: Boundary, prev: &[f64], i: usize) -> (f64, f64) {
    let n = prev.len();
    let left = if i > 0 {
        prev[i - 1]
    } else {
        match boundary {
            Boundary::Neumann => prev[0],
            Boundary::QuadraticExtrapolation => 3.0 * prev[0] - 3.0 * prev[1] + prev[2],
        }
    };
    let right = if i + 1 < n {
        prev[i + 1]
    } else {
        match boundary {
            Boundary::Neumann => prev[n - 1],
            Boundary::QuadraticExtrapolation => 3.0 * prev[n - 1] - 3.0 * prev[n - 2] + prev[n - 3],
        }
    };
    (left, right)
}

/// Splits a first-order coefficient into forward/backward weights by sign.
#[inline]
pub(crate) fn upwind(c: f64, h: f64) -> (f64, f64) {
    if c >= 0.0 {
        (c / h, 0.0)
    } else {
        (0.0, -c / h)
    }
}

impl Stepper for Scheme1D {
    fn len(&self) -> usize {
        self.wp.len()
    }

    fn step(&self, prev: &[f64], next: &mut [f64]) {
        for (i, out) in next.iter_mut().enumerate() {
            let u = prev[i];
            let (l, r) = neighbours(self.boundary, prev, i);
            let (dl, dr) = (l - u, r - u);
            let m = self.wp[i] * dr + self.wm[i] * dl + self.src_in[i];
            let d = self.dp[i] * dr + self.dm[i] * dl + self.src_out[i] - self.kill * u;
            *out = u + self.dt * (self.g.apply(m) + d);
        }
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// Solves a 1-D equation on `spec.slow` from `init`.
pub(crate) fn solve_1d(
    spec: &GridSpec,
    kind: SolutionKind,
    scheme: Scheme1D,
    init: Vec<f64>,
) -> Result<GridSolution> {
    let dt_max = scheme.dt_max();
    let (steps, dt) = spec.schedule(dt_max)?;
    let diag = Diagnostics { cfl_ratio: dt / dt_max, ..Diagnostics::default() };
    let scheme = scheme.with_dt(dt);
    march(spec, kind, None, Arc::new(scheme), init, steps, diag)
}

/// G-heat equation `∂_t u = G(vol² u'') + drift·u'` on the slow axis.
pub fn solve_gheat_1d(g: &GFunction, drift: f64, vol: f64, phi: &Expr, spec: &GridSpec) -> Result<GridSolution> {
    let sg = g.scalar_form()?;
    if !(drift.is_finite() && vol.is_finite()) {
        return Err(Error::invalid("drift and vol must be finite"));
    }
    let coef = NodeCoef { diffusion: vol * vol, drift, ..NodeCoef::default() };
    let scheme = Scheme1D::new(&spec.slow, sg, spec.boundary, 0.0, |_| Ok(coef))?;
    let init = sample_phi(phi, &spec.slow)?;
    solve_1d(spec, SolutionKind::GHeat, scheme, init)
}

pub(crate) fn sample_phi(phi: &Expr, axis: &Axis) -> Result<Vec<f64>> {
    axis.points()
        .into_iter()
        .map(|x| {
            let v = phi.eval(&[x], &[]);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteField { component: "phi".into(), x_slow: x, x_fast: 0.0 })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::fnpde::dpp_check;
    use alloc::vec;

    fn spec(boundary: Boundary, horizon: f64) -> GridSpec {
        GridSpec::new(Axis::new(-3.0, 3.0, 121).unwrap(), None, horizon, 5).unwrap().with_boundary(boundary)
    }

    fn g() -> GFunction {
        GFunction::interval(1.0, 4.0).unwrap()
    }

    #[test]
    fn quadratic_data_exact_with_extrapolated_ghosts() {
        let sp = spec(Boundary::QuadraticExtrapolation, 0.25);
        let sol = solve_gheat_1d(&g(), 0.0, 1.0, &parse_expr("x1^2", 1, 0).unwrap(), &sp).unwrap();
        let last = sol.last();
        let i0 = 60;
        assert!((last.values[i0] - 1.0).abs() < 1e-10, "{}", last.values[i0]);
        let sol = solve_gheat_1d(&g(), 0.0, 1.0, &parse_expr("-x1^2", 1, 0).unwrap(), &sp).unwrap();
        assert!((sol.last().values[i0] + 0.25).abs() < 1e-10);
    }

    #[test]
    fn constants_preserved_exactly() {
        let sol = solve_gheat_1d(&g(), 0.7, 1.3, &Expr::Const(3.0), &spec(Boundary::Neumann, 0.3)).unwrap();
        for s in &sol.slices {
            assert!(s.values.iter().all(|v| *v == 3.0));
        }
        assert_eq!(dpp_check(&sol, 10).unwrap(), 0.0);
    }

    #[test]
    fn drift_transports_linear_data() {
        let sp = spec(Boundary::QuadraticExtrapolation, 0.5);
        let sol = solve_gheat_1d(&g(), 0.8, 1.0, &parse_expr("x1", 1, 0).unwrap(), &sp).unwrap();
        assert!((sol.last().values[60] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn dpp_is_exact() {
        let sp = spec(Boundary::Neumann, 0.2);
        let sol = solve_gheat_1d(&g(), 0.3, 1.0, &parse_expr("sin(3*x1)", 1, 0).unwrap(), &sp).unwrap();
        assert_eq!(dpp_check(&sol, 0).unwrap(), 0.0);
        assert!(dpp_check(&sol, 10).unwrap() <= 1e-12);
        assert!(dpp_check(&sol, 7).unwrap() <= 1e-12);
    }

    #[test]
    fn stationary_solve_matches_relaxation() {
        let axis = Axis::new(-4.0, 4.0, 81).unwrap();
        let coef = |y: f64| {
            Ok(NodeCoef { diffusion: 0.5, first_in: 0.2, source_in: 2.0 * libm::sin(y), drift: -y, source_out: libm::tanh(y) })
        };
        let scheme = Scheme1D::new(&axis, g().scalar_form().unwrap(), Boundary::Neumann, 0.5, coef).unwrap();
        let (v, iters) = scheme.solve_stationary(100, 1e-12).unwrap();
        assert!(iters < 100);
        let dt = scheme.dt_max();
        let relax = scheme.clone().with_dt(dt);
        let mut cur = vec![0.0; 81];
        let mut next = cur.clone();
        for _ in 0..(80.0 / (0.5 * dt)) as usize {
            relax.step(&cur, &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        let diff = cur.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }
}
