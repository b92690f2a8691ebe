use std::sync::Arc;

use gavg_core::ergogen::GeneratorTable;
use gavg_core::fnpde::{solve_averaged, solve_gheat_1d, solve_two_scale, GridSolution, GridSpec, TimeStep};
use gavg_core::Expr;

use super::{common_depth, compare, decreasing, obtain_table, SolveSummary};
use crate::config::{ExperimentConfig, ExperimentKind, Window};
use crate::error::AppResult;

#[derive(Debug, Clone)]
pub struct GheatReport {
    pub error: f64,
    pub solve: SolveSummary,
    pub within_tolerance: Option<bool>,
    pub solution: GridSolution,
}

/// G-heat solve against a closed-form solution `oracle(x, t)`.
pub fn run_gheat_oracle(cfg: &ExperimentConfig) -> AppResult<GheatReport> {
    cfg.validate_for(ExperimentKind::GheatOracle)?;
    let oracle = cfg.gheat.oracle.as_ref().expect("validated");
    let spec = cfg.grid()?;
    let solution = solve_gheat_1d(&cfg.system.g, cfg.gheat.drift, cfg.gheat.vol, &cfg.system.phi, spec)?;
    let depth: Vec<usize> = solution.slices.iter().map(|s| solution.mask_depth(s.step)).collect();
    let c = compare(&solution, |_, t, i| oracle.eval(&[spec.slow.x(i), t], &[]), &depth, &cfg.window)?;
    Ok(GheatReport {
        error: c.error,
        solve: SolveSummary::of(&solution, cfg.dpp_delta)?,
        within_tolerance: cfg.oracle_tolerance.map(|tol| c.error <= tol),
        solution,
    })
}

/// `max over r ∈ [lo, hi]` of `φ(x + r t)`: dense sampling, then a golden
/// section search around the best sample.
pub fn max_formula(phi: &Expr, x: f64, t: f64, lo: f64, hi: f64) -> f64 {
    const SAMPLES: usize = 4000;
    let f = |r: f64| phi.eval(&[x + r * t], &[]);
    if hi <= lo || t == 0.0 {
        return f(lo).max(f(hi));
    }
    let step = (hi - lo) / SAMPLES as f64;
    let (mut best_k, mut best) = (0, f(lo));
    for k in 1..=SAMPLES {
        let v = f(lo + k as f64 * step);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let (mut a, mut b) = (lo + best_k.saturating_sub(1) as f64 * step, (lo + (best_k + 1) as f64 * step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub epsilon: f64,
    pub error: f64,
    pub spread: f64,
    pub solve: SolveSummary,
}

#[derive(Debug, Clone)]
pub struct MaxOracleReport {
    /// `−G̃(x̃, −1, 0)` and `G̃(x̃, 1, 0)` at the first table node.
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Largest change of either bound across the table's x̃ nodes.
    pub mu_spread: f64,
    pub averaged_error: f64,
    pub averaged: SolveSummary,
    pub within_tolerance: Option<bool>,
    pub rows: Vec<OracleRow>,
    pub decreasing: bool,
    pub table: Arc<GeneratorTable>,
    pub averaged_solution: GridSolution,
    pub solutions: Vec<GridSolution>,
    pub window: Window,
}

/// Zero slow volatility: the averaged solution is a maximal-distribution
/// expectation with drift bounds read off the table.
pub fn run_max_oracle(cfg: &ExperimentConfig) -> AppResult<MaxOracleReport> {
    cfg.validate_for(ExperimentKind::MaxOracle)?;
    let spec = cfg.two_scale_grid()?.clone();
    let table = Arc::new(obtain_table(cfg)?);
    let bounds: Vec<(f64, f64)> = table
        .x_grid()
        .iter()
        .map(|&x| Ok((-table.eval(x, -1.0, 0.0)?, table.eval(x, 1.0, 0.0)?)))
        .collect::<gavg_core::Result<_>>()?;
    let (mu_lo, mu_hi) = bounds[0];
    let mu_spread = bounds.iter().fold(0.0f64, |m, (l, h)| m.max((l - mu_lo).abs()).max((h - mu_hi).abs()));
    let phi = &cfg.system.phi;

    let slow = cfg.averaged_slow.unwrap_or(spec.slow);
    let aspec = GridSpec::new(slow, None, spec.horizon, spec.boundary_margin)?
        .with_snapshots(spec.snapshots)?
        .with_time_step(TimeStep::Cfl)?;
    let averaged_solution = solve_averaged(&table, phi, &aspec)?;
    let adepth: Vec<usize> = averaged_solution.slices.iter().map(|s| averaged_solution.mask_depth(s.step)).collect();
    let oracle_at = |ax: gavg_core::fnpde::Axis| move |_: usize, t: f64, i: usize| max_formula(phi, ax.x(i), t, mu_lo, mu_hi);
    let averaged_error = compare(&averaged_solution, oracle_at(slow), &adepth, &cfg.window)?.error;

    let mut solutions = Vec::with_capacity(cfg.ladder.len());
    for &eps in &cfg.ladder {
        solutions.push(solve_two_scale(&cfg.system.with_epsilon(eps)?, &spec)?);
    }
    let depth = common_depth(&solutions.iter().collect::<Vec<_>>())?;
    let mut rows = Vec::with_capacity(solutions.len());
    for (sol, &eps) in solutions.iter().zip(&cfg.ladder) {
        let c = compare(sol, oracle_at(spec.slow), &depth, &cfg.window)?;
        rows.push(OracleRow { epsilon: eps, error: c.error, spread: c.spread, solve: SolveSummary::of(sol, cfg.dpp_delta)? });
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    Ok(MaxOracleReport {
        mu_lo,
        mu_hi,
        mu_spread,
        averaged_error,
        averaged: SolveSummary::of(&averaged_solution, cfg.dpp_delta)?,
        within_tolerance: cfg.oracle_tolerance.map(|tol| averaged_error <= tol),
        rows,
        decreasing: decreasing(&errors),
        table,
        averaged_solution,
        solutions,
        window: cfg.window.clone(),
    })
}
