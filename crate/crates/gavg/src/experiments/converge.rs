use std::sync::Arc;
use std::time::Instant;

use gavg_core::ergogen::GeneratorTable;
use gavg_core::fnpde::{solve_averaged, solve_two_scale, GridSolution, GridSpec, TimeStep};

use super::{common_depth, compare, decreasing, obtain_table, oscillation, SolveSummary};
use crate::config::{ExperimentConfig, ExperimentKind, Window};
use crate::error::AppResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// Sup of `|u^ε − ũ|` over the window and the fast slices.
    pub error: f64,
    /// Sup over the window of the max-minus-min of u^ε across fast slices.
    pub spread: f64,
    pub solve: SolveSummary,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub averaged: SolveSummary,
    pub window: Window,
    pub horizon: f64,
    pub oscillation: f64,
    /// Relative threshold; the final error must not exceed `tolerance·oscillation`.
    pub tolerance: f64,
    pub error_decreasing: bool,
    pub spread_decreasing: bool,
    pub final_within_tolerance: bool,
    pub table: Arc<GeneratorTable>,
    pub table_wall_s: f64,
    pub averaged_solution: GridSolution,
    pub solutions: Vec<GridSolution>,
}

impl ConvergenceReport {
    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.error)
    }

    pub fn passes(&self) -> bool {
        self.error_decreasing && self.spread_decreasing && self.final_within_tolerance
    }
}

/// Averaged-equation grid matching a two-scale spec: same slow axis, horizon,
/// margin and snapshot layout.
pub(crate) fn averaged_spec(spec: &GridSpec) -> AppResult<GridSpec> {
    Ok(GridSpec::new(spec.slow, None, spec.horizon, spec.boundary_margin)?
        .with_snapshots(spec.snapshots)?
        .with_time_step(TimeStep::Cfl)?)
}

pub fn run_converge(cfg: &ExperimentConfig) -> AppResult<ConvergenceReport> {
    cfg.validate_for(ExperimentKind::Converge)?;
    let spec = cfg.two_scale_grid()?.clone();

    let clock = Instant::now();
    let table = Arc::new(obtain_table(cfg)?);
    let table_wall_s = clock.elapsed().as_secs_f64();

    let averaged_solution = solve_averaged(&table, &cfg.system.phi, &averaged_spec(&spec)?)?;
    let averaged = SolveSummary::of(&averaged_solution, cfg.dpp_delta)?;

    let mut solutions = Vec::with_capacity(cfg.ladder.len());
    for &eps in &cfg.ladder {
        let sys = cfg.system.with_epsilon(eps)?;
        solutions.push(solve_two_scale(&sys, &spec)?);
    }

    let mut all: Vec<&GridSolution> = solutions.iter().collect();
    all.push(&averaged_solution);
    let depth = common_depth(&all)?;

    let mut rows = Vec::with_capacity(solutions.len());
    for (sol, &eps) in solutions.iter().zip(&cfg.ladder) {
        let c = compare(sol, |k, _, i| averaged_solution.slices[k].values[i], &depth, &cfg.window)?;
        rows.push(ConvergenceRow { epsilon: eps, error: c.error, spread: c.spread, solve: SolveSummary::of(sol, cfg.dpp_delta)? });
    }

    let osc = oscillation(&averaged_solution.slices[0].values);
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let spreads: Vec<f64> = rows.iter().map(|r| r.spread).collect();
    let final_error = errors.last().copied().unwrap_or(0.0);
    Ok(ConvergenceReport {
        error_decreasing: decreasing(&errors),
        spread_decreasing: decreasing(&spreads),
        final_within_tolerance: final_error <= cfg.tolerance * osc || final_error <= super::NOISE_FLOOR,
        rows,
        averaged,
        window: cfg.window.clone(),
        horizon: spec.horizon,
        oscillation: osc,
        tolerance: cfg.tolerance,
        table,
        table_wall_s,
        averaged_solution,
        solutions,
    })
}
