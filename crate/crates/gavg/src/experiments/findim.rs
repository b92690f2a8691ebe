//! Two-time expectations `Ê[φ(X̃_{t1}, X̃_{t2})]` by nesting: an inner solve on
//! `[0, t2 − t1]` for every value a of the first argument, then an outer
//! solve on `[0, t1]` from `φ¹(a, ·) = u_a(t2 − t1, a, ·)`.

use std::sync::Arc;

use gavg_core::ergogen::GeneratorTable;
use gavg_core::fnpde::{
    solve_averaged_from, solve_two_scale_from, two_scale_dt_max, AveragedStepper, Axis, GridSolution, GridSpec, TimeStep,
};
use gavg_core::Expr;

use super::converge::averaged_spec;
use super::{decreasing, obtain_table, SolveSummary};
use crate::config::{ExperimentConfig, ExperimentKind, FindimConfig, FindimMode, Window};
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq)]
pub enum FindimRoute {
    /// `φ = f(a) + g(b)`: one inner solve for g.
    Additive,
    /// One inner solve per listed slow node, linear in a between them.
    Nested { nodes: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FindimRow {
    pub epsilon: f64,
    /// Sup over the window of `|A_ε − B|` at the final time.
    pub discrepancy: f64,
    pub steps: usize,
    pub dt: f64,
    /// Largest semigroup discrepancy over the inner and outer solves.
    pub dpp: f64,
}

#[derive(Debug, Clone)]
pub struct FindimReport {
    pub t1: f64,
    pub t2: f64,
    pub route: FindimRoute,
    pub rows: Vec<FindimRow>,
    pub averaged_steps: usize,
    pub averaged_dt: f64,
    pub averaged_dpp: f64,
    pub decreasing: bool,
    /// Route B at the final time, on the slow axis.
    pub route_b: Vec<f64>,
    /// Route A at the final time per ε, slow-major over (slow, fast).
    pub route_a: Vec<Vec<f64>>,
    pub spec: GridSpec,
    pub window: Window,
}

fn route(fc: &FindimConfig, slow: &Axis) -> (FindimRoute, Option<(Expr, Expr)>) {
    if fc.mode == FindimMode::Auto {
        if let Some(split) = fc.phi.split_additive(0, 1) {
            return (FindimRoute::Additive, Some(split));
        }
    }
    let n = slow.nodes;
    let mut nodes: Vec<usize> = (0..n).step_by(fc.stride).collect();
    if *nodes.last().unwrap() != n - 1 {
        nodes.push(n - 1);
    }
    (FindimRoute::Nested { nodes }, None)
}

/// Outer solution and the largest dpp discrepancy over all solves.
fn nest<F>(
    fc: &FindimConfig,
    route: &FindimRoute,
    split: Option<&(Expr, Expr)>,
    slow: &Axis,
    nf: usize,
    dpp_delta: usize,
    solve: F,
) -> AppResult<(GridSolution, f64)>
where
    F: Fn(Vec<f64>, f64) -> AppResult<GridSolution>,
{
    let xs = slow.points();
    let gap = fc.t2 - fc.t1;
    let spread = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { xs.iter().flat_map(|x| std::iter::repeat_n(f(*x), nf)).collect() };
    let mut dpp: f64 = 0.0;
    let mut inner = |init: Vec<f64>| -> AppResult<Vec<f64>> {
        let sol = solve(init, gap)?;
        dpp = dpp.max(SolveSummary::of(&sol, dpp_delta)?.dpp);
        Ok(sol.last().values.clone())
    };

    let phi1 = match (route, split) {
        (FindimRoute::Additive, Some((f, g))) => {
            let ug = inner(spread(&|x| g.eval(&[x, x], &[])))?;
            let fx = spread(&|x| f.eval(&[x, x], &[]));
            fx.iter().zip(&ug).map(|(a, b)| a + b).collect::<Vec<f64>>()
        }
        (FindimRoute::Nested { nodes }, _) => {
            let finals = nodes
                .iter()
                .map(|&m| {
                    let a = xs[m];
                    inner(spread(&|x| fc.phi.eval(&[a, x], &[])))
                })
                .collect::<AppResult<Vec<_>>>()?;
            let mut phi1 = vec![0.0; xs.len() * nf];
            let mut seg = 0;
            for i in 0..xs.len() {
                while seg + 1 < nodes.len() && nodes[seg + 1] <= i {
                    seg += 1;
                }
                for j in 0..nf {
                    let idx = i * nf + j;
                    phi1[idx] = if nodes[seg] == i {
                        finals[seg][idx]
                    } else {
                        let w = (i - nodes[seg]) as f64 / (nodes[seg + 1] - nodes[seg]) as f64;
                        finals[seg][idx] + w * (finals[seg + 1][idx] - finals[seg][idx])
                    };
                }
            }
            phi1
        }
        (FindimRoute::Additive, None) => unreachable!("additive route always carries its split"),
    };

    let outer = solve(phi1, fc.t1)?;
    dpp = dpp.max(SolveSummary::of(&outer, dpp_delta)?.dpp);
    Ok((outer, dpp))
}

/// Stage spec with the step fixed to the one a direct solve to `t2` would take.
fn stage(full: &GridSpec, horizon: f64, dt: f64) -> AppResult<GridSpec> {
    let steps = horizon / dt;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(AppError::Config(format!(
            "the step {dt} of the direct solve does not divide the stage length {horizon}; adjust t1 or grid.snapshots"
        )));
    }
    let mut s = full.clone();
    s.horizon = horizon;
    s.time_step = TimeStep::Fixed(dt);
    s.validate()?;
    Ok(s)
}

pub fn run_findim(cfg: &ExperimentConfig) -> AppResult<FindimReport> {
    cfg.validate_for(ExperimentKind::Findim)?;
    let fc = cfg.findim.as_ref().expect("validated");
    let mut full = cfg.two_scale_grid()?.clone();
    full.horizon = fc.t2;
    full.time_step = TimeStep::Cfl;
    let slow = full.slow;
    let nf = full.fast_nodes();
    let (route, split) = route(fc, &slow);

    let table: Arc<GeneratorTable> = Arc::new(obtain_table(cfg)?);
    let afull = averaged_spec(&full)?;
    let (a_steps, a_dt) = afull.schedule(AveragedStepper::new(table.clone(), &afull)?.dt_max())?;
    let (b, averaged_dpp) = nest(fc, &route, split.as_ref(), &slow, 1, cfg.dpp_delta, |init, h| {
        Ok(solve_averaged_from(&table, &stage(&afull, h, a_dt)?, init)?)
    })?;
    let route_b = b.last().values.clone();

    let margin = full.boundary_margin;
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    let mut route_a = Vec::with_capacity(cfg.ladder.len());
    for &eps in &cfg.ladder {
        let sys = cfg.system.with_epsilon(eps)?;
        let (steps, dt) = full.schedule(two_scale_dt_max(&sys, &full)?)?;
        let (a, dpp) = nest(fc, &route, split.as_ref(), &slow, nf, cfg.dpp_delta, |init, h| {
            Ok(solve_two_scale_from(&sys, &stage(&full, h, dt)?, init)?)
        })?;
        // The influence zone spans both stages.
        let depth = steps.max(a_steps).min(margin);
        let js: Vec<usize> = cfg.window.slices.iter().map(|y| a.nearest_fast(*y)).collect();
        if js.iter().any(|j| *j < depth || *j + depth >= nf) {
            return Err(AppError::config("a fast slice falls in the boundary zone"));
        }
        let last = a.last();
        let mut discrepancy: f64 = 0.0;
        for i in depth..slow.nodes - depth {
            if !cfg.window.contains_x(slow.x(i)) {
                continue;
            }
            for &j in &js {
                discrepancy = discrepancy.max((a.value(last, i, j) - route_b[i]).abs());
            }
        }
        rows.push(FindimRow { epsilon: eps, discrepancy, steps, dt, dpp });
        route_a.push(last.values.clone());
    }

    let d: Vec<f64> = rows.iter().map(|r| r.discrepancy).collect();
    Ok(FindimReport {
        t1: fc.t1,
        t2: fc.t2,
        route,
        decreasing: decreasing(&d),
        rows,
        averaged_steps: a_steps,
        averaged_dt: a_dt,
        averaged_dpp,
        route_b,
        route_a,
        spec: full,
        window: cfg.window.clone(),
    })
}
