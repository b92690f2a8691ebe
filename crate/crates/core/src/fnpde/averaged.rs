//! Monotone scheme for the averaged equation `∂_t u = G̃(x̃, u_x̃, u_x̃x̃)` with a
//! tabulated generator. The first-order dependence uses a Godunov extremum
//! over the one-sided slopes; the second difference is central.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::scheme1d::{neighbours, sample_phi};
use super::{march, Boundary, Diagnostics, GridSolution, GridSpec, SolutionKind, Stepper};
use crate::ergogen::GeneratorTable;
use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Debug, Clone)]
pub struct AveragedStepper {
    table: Arc<GeneratorTable>,
    cells: Vec<(usize, f64)>,
    boundary: Boundary,
    h: f64,
    dt: f64,
}

impl AveragedStepper {
    pub fn new(table: Arc<GeneratorTable>, spec: &GridSpec) -> Result<Self> {
        if spec.fast.is_some() {
            return Err(Error::invalid("the averaged equation has no fast axis"));
        }
        let cells = spec
            .slow
            .points()
            .into_iter()
            .map(|x| table.locate_x(x).ok_or(Error::Coverage { x, p: 0.0, a: 0.0 }))
            .collect::<Result<Vec<_>>>()?;
        Ok(AveragedStepper { table, cells, boundary: spec.boundary, h: spec.slow.h(), dt: 0.0 })
    }

    /// `0.9 / (L_p/h + 2 L_A/h²)` with the interpolant's gradient bounds.
    pub fn dt_max(&self) -> f64 {
        let (lp, la) = self.table.gradient_bounds();
        let rate = lp / self.h + 2.0 * la / (self.h * self.h);
        if rate > 0.0 {
            0.9 / rate
        } else {
            f64::INFINITY
        }
    }

    /// Godunov value: max of G̃ over `[p⁻, p⁺]` when `p⁻ ≤ p⁺`, otherwise the
    /// min over `[p⁺, p⁻]`. G̃ is piecewise linear in p, so the extremum sits
    /// at an endpoint or a kink.
    #[inline]
    fn godunov(&self, ix: usize, w: f64, pm: f64, pp: f64, a: f64) -> f64 {
        let t = &*self.table;
        let (lo, hi, upper) = if pm <= pp { (pm, pp, true) } else { (pp, pm, false) };
        let pick = |x: f64, y: f64| if upper { x.max(y) } else { x.min(y) };
        let mut best = pick(t.eval_cell(ix, w, lo, a), t.eval_cell(ix, w, hi, a));
        if lo < hi {
            t.for_each_kink(a, |p| {
                if p > lo && p < hi {
                    best = pick(best, t.eval_cell(ix, w, p, a));
                }
            });
        }
        best
    }
}

impl Stepper for AveragedStepper {
    fn len(&self) -> usize {
        self.cells.len()
    }

    fn step(&self, prev: &[f64], next: &mut [f64]) {
        let h = self.h;
        for (i, out) in next.iter_mut().enumerate() {
            let u = prev[i];
            let (l, r) = neighbours(self.boundary, prev, i);
            let (pm, pp) = ((u - l) / h, (r - u) / h);
            let a = (r - 2.0 * u + l) / (h * h);
            let (ix, w) = self.cells[i];
            *out = u + self.dt * self.godunov(ix, w, pm, pp, a);
        }
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// Solves the averaged equation from `u(0) = φ` on `spec.slow`.
pub fn solve_averaged(table: &GeneratorTable, phi: &Expr, spec: &GridSpec) -> Result<GridSolution> {
    solve_averaged_from(table, spec, sample_phi(phi, &spec.slow)?)
}

/// As [`solve_averaged`] from nodal values.
pub fn solve_averaged_from(table: &GeneratorTable, spec: &GridSpec, init: Vec<f64>) -> Result<GridSolution> {
    if init.len() != spec.slow.nodes {
        return Err(Error::DimensionMismatch { expected: spec.slow.nodes, found: init.len() });
    }
    // The stepper keeps the stored values only.
    let lean = GeneratorTable::from_parts(
        table.x_grid().to_vec(),
        table.n_directions(),
        table.values().to_vec(),
        Vec::new(),
        table.eta,
        table.horizon,
    )?;
    let mut stepper = AveragedStepper::new(Arc::new(lean), spec)?;
    let dt_max = stepper.dt_max();
    let (steps, dt) = spec.schedule(dt_max)?;
    stepper.dt = dt;
    let diag = Diagnostics { cfl_ratio: dt / dt_max, ..Diagnostics::default() };
    march(spec, SolutionKind::Averaged, None, Arc::new(stepper), init, steps, diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::fnpde::{dpp_check, Axis};
    use alloc::vec;

    fn heat(lo: f64, hi: f64) -> GeneratorTable {
        GeneratorTable::from_fn(vec![-4.0, 0.0, 4.0], 16, move |_, _, a| if a >= 0.0 { 0.5 * hi * a } else { 0.5 * lo * a })
            .unwrap()
    }

    #[test]
    fn heat_generator_matches_gheat_solver() {
        let spec = GridSpec::new(Axis::new(-3.0, 3.0, 121).unwrap(), None, 0.25, 5)
            .unwrap()
            .with_boundary(Boundary::QuadraticExtrapolation);
        let sol = solve_averaged(&heat(1.0, 4.0), &parse_expr("x1^2", 1, 0).unwrap(), &spec).unwrap();
        assert!((sol.last().values[60] - 1.0).abs() < 1e-10);
        assert!(dpp_check(&sol, 10).unwrap() <= 1e-12);
    }

    #[test]
    fn maximal_transport() {
        // G̃(p) = max(μ_lo p, μ_hi p) gives u = max over r of φ(x + r t).
        let (mlo, mhi) = (-0.5, 1.0);
        let t = GeneratorTable::from_fn(vec![-4.0, 4.0], 16, move |_, p, _| (mlo * p).max(mhi * p)).unwrap();
        let spec = GridSpec::new(Axis::new(-3.0, 3.0, 1201).unwrap(), None, 0.5, 0).unwrap();
        let sol = solve_averaged(&t, &parse_expr("sin(2*x1)", 1, 0).unwrap(), &spec).unwrap();
        let last = sol.last();
        let mut err: f64 = 0.0;
        for (i, v) in last.values.iter().enumerate() {
            let x = spec.slow.x(i);
            if x.abs() > 1.5 {
                continue;
            }
            let exact = (0..=2000)
                .map(|k| libm::sin(2.0 * (x + (mlo + (mhi - mlo) * k as f64 / 2000.0) * 0.5)))
                .fold(f64::NEG_INFINITY, f64::max);
            err = err.max((v - exact).abs());
        }
        assert!(err < 2e-2, "{err}");
    }

    #[test]
    fn uncovered_grid_rejected() {
        let spec = GridSpec::new(Axis::new(-5.0, 5.0, 11).unwrap(), None, 0.1, 0).unwrap();
        assert!(matches!(solve_averaged(&heat(1.0, 2.0), &Expr::Const(0.0), &spec), Err(Error::Coverage { .. })));
    }
}
