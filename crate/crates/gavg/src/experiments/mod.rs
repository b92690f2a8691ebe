//! Experiment runners. Each returns a report holding everything the writers
//! need; nothing here touches the filesystem except `table.load`.

mod converge;
mod findim;
mod generator;
mod oracle;
mod stochastic;

use std::time::Instant;

use gavg_core::ergogen::{build_table_with, GeneratorTable};
use gavg_core::fnpde::{dpp_check, GridSolution};
use gavg_core::{audit_hypotheses, check_axioms, AxiomReport, HypothesisReport, SampleBox};

pub use converge::{run_converge, ConvergenceReport, ConvergenceRow};
pub use findim::{run_findim, FindimReport, FindimRoute, FindimRow};
pub use generator::{run_generator, GeneratorReport, ProbeRow};
pub use oracle::{max_formula, run_gheat_oracle, run_max_oracle, GheatReport, MaxOracleReport, OracleRow};
pub use stochastic::{
    run_contraction, run_khasminskii, run_moments, run_simulate, KhasminskiiReport, KhasminskiiRow, SimulationReport,
};

use crate::config::{ExperimentConfig, ExperimentKind, Window};
use crate::error::{AppError, AppResult};

/// Differences at or below this level count as converged in ladder verdicts.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Strict decrease along the ladder; a pair already at the noise floor passes.
pub fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0] || w[0] <= NOISE_FLOOR)
}

/// Step statistics of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSummary {
    pub steps: usize,
    pub dt: f64,
    /// Semigroup re-run discrepancy over the last `dpp_delta` steps.
    pub dpp: f64,
    pub cfl_ratio: f64,
    pub viscosity_max: f64,
    pub max_update: f64,
    pub wall_s: f64,
}

impl SolveSummary {
    pub fn of(sol: &GridSolution, dpp_delta: usize) -> AppResult<Self> {
        let d = &sol.diagnostics;
        Ok(SolveSummary {
            steps: d.steps,
            dt: d.dt,
            dpp: dpp_check(sol, dpp_delta.min(d.steps.saturating_sub(1)))?,
            cfl_ratio: d.cfl_ratio,
            viscosity_max: d.viscosity_max,
            max_update: d.max_update,
            wall_s: d.wall_time_s,
        })
    }
}

/// Builds the table, or reads it when `table.load` is set.
pub fn obtain_table(cfg: &ExperimentConfig) -> AppResult<GeneratorTable> {
    let tc = cfg.table_config()?;
    match &tc.load {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
            crate::output::read_table(&bytes)
        }
        None => Ok(build_table_with(&cfg.system, &tc.x_grid, &tc.options)?),
    }
}

/// Mask depth per stored slice: the deepest influence zone over `sols`.
pub(crate) fn common_depth(sols: &[&GridSolution]) -> AppResult<Vec<usize>> {
    let first = sols[0];
    let tol = 1e-9 * first.spec.horizon;
    let mut depth = vec![0usize; first.slices.len()];
    for sol in sols {
        if sol.slices.len() != depth.len() || sol.slices.iter().zip(&first.slices).any(|(a, b)| (a.t - b.t).abs() > tol) {
            return Err(AppError::config("solves store different slice times; use CFL steps or matching snapshots"));
        }
        for (d, s) in depth.iter_mut().zip(&sol.slices) {
            *d = (*d).max(sol.mask_depth(s.step));
        }
    }
    Ok(depth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Comparison {
    pub error: f64,
    pub spread: f64,
}

/// Sup of `|u − reference|` and of the fast-slice spread of u over the window,
/// with `depth[k]` nodes masked at both ends of each axis in slice k.
pub(crate) fn compare(
    sol: &GridSolution,
    reference: impl Fn(usize, f64, usize) -> f64,
    depth: &[usize],
    window: &Window,
) -> AppResult<Comparison> {
    let horizon = sol.spec.horizon;
    let ns = sol.spec.slow.nodes;
    let nf = sol.spec.fast_nodes();
    let js: Vec<usize> = window.slices.iter().map(|y| sol.nearest_fast(*y)).collect();
    let (mut error, mut spread, mut seen) = (0.0f64, 0.0f64, false);
    for (k, slice) in sol.slices.iter().enumerate() {
        if !window.contains_t(slice.t, horizon) {
            continue;
        }
        let d = depth[k];
        if sol.spec.fast.is_some() && js.iter().any(|j| *j < d || *j + d >= nf) {
            return Err(AppError::Config(format!("a fast slice falls in the boundary zone at t = {}", slice.t)));
        }
        for i in d..ns.saturating_sub(d) {
            if !window.contains_x(sol.spec.slow.x(i)) {
                continue;
            }
            seen = true;
            let r = reference(k, slice.t, i);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &j in &js {
                let v = sol.value(slice, i, j);
                error = error.max((v - r).abs());
                lo = lo.min(v);
                hi = hi.max(v);
            }
            spread = spread.max(hi - lo);
        }
    }
    if !seen {
        return Err(AppError::config("the error window contains no interior node"));
    }
    Ok(Comparison { error, spread })
}

/// Oscillation of the initial datum on the slow grid.
pub(crate) fn oscillation(values: &[f64]) -> f64 {
    let hi = values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let lo = values.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    hi - lo
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub audit: HypothesisReport,
    pub axioms: AxiomReport,
    pub sample_box: SampleBox,
}

/// Hypothesis audit on the grid box plus the G-axiom suite.
pub fn run_check(cfg: &ExperimentConfig) -> AppResult<CheckReport> {
    let sample_box = match &cfg.grid {
        Some(g) => SampleBox {
            slow: (g.slow.lo, g.slow.hi),
            fast: g.fast.map(|f| (f.lo, f.hi)).unwrap_or((-3.0, 3.0)),
        },
        None => SampleBox { slow: (-3.0, 3.0), fast: (-3.0, 3.0) },
    };
    let audit = audit_hypotheses(&cfg.system, sample_box, 2000, cfg.seed)?;
    let axioms = check_axioms(&cfg.system.g, 1000, cfg.seed)?;
    Ok(CheckReport { audit, axioms, sample_box })
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: GridSolution,
    pub summary: SolveSummary,
}

/// One two-scale solve at `system.epsilon`.
pub fn run_solve(cfg: &ExperimentConfig) -> AppResult<SolveReport> {
    cfg.validate_for(ExperimentKind::Solve)?;
    let solution = gavg_core::fnpde::solve_two_scale(&cfg.system, cfg.two_scale_grid()?)?;
    let summary = SolveSummary::of(&solution, cfg.dpp_delta)?;
    Ok(SolveReport { solution, summary })
}

#[derive(Debug, Clone)]
pub enum Report {
    Check(Box<CheckReport>),
    Solve(Box<SolveReport>),
    Converge(Box<ConvergenceReport>),
    GheatOracle(Box<GheatReport>),
    MaxOracle(Box<MaxOracleReport>),
    Findim(Box<FindimReport>),
    Generator(Box<GeneratorReport>),
    Contraction(Box<gavg_core::scenario::ContractionReport>),
    Khasminskii(Box<KhasminskiiReport>),
    Moments(Box<gavg_core::scenario::MomentReport>),
    Simulate(Box<SimulationReport>),
}

impl Report {
    pub fn kind(&self) -> &'static str {
        match self {
            Report::Check(_) => "check",
            Report::Solve(_) => "solve",
            Report::Converge(_) => "converge",
            Report::GheatOracle(_) => "gheat_oracle",
            Report::MaxOracle(_) => "max_oracle",
            Report::Findim(_) => "findim",
            Report::Generator(_) => "generator",
            Report::Contraction(_) => "contraction",
            Report::Khasminskii(_) => "khasminskii",
            Report::Moments(_) => "moments",
            Report::Simulate(_) => "simulate",
        }
    }

    /// `Err` names the first failed verdict.
    pub fn verdict(&self) -> Result<(), String> {
        let fail = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(msg.to_string()) };
        match self {
            Report::Check(r) => {
                fail(r.audit.passes(), "hypothesis audit")?;
                fail(r.axioms.passed(), "G axioms")
            }
            Report::Solve(_) | Report::Simulate(_) => Ok(()),
            Report::Converge(r) => {
                fail(r.error_decreasing, "error does not decrease along the ladder")?;
                fail(r.spread_decreasing, "slice spread does not decrease along the ladder")?;
                fail(r.final_within_tolerance, "final error exceeds the tolerance")
            }
            Report::GheatOracle(r) => fail(r.within_tolerance.unwrap_or(true), "oracle error exceeds the tolerance"),
            Report::MaxOracle(r) => {
                fail(r.within_tolerance.unwrap_or(true), "averaged oracle error exceeds the tolerance")?;
                fail(r.decreasing, "two-scale oracle error does not decrease along the ladder")
            }
            Report::Findim(r) => fail(r.decreasing, "discrepancy does not decrease along the ladder"),
            Report::Generator(r) => match &r.properties {
                Some(p) => fail(p.subadditive() && p.monotone() && p.homogeneous(), "table properties"),
                None => Ok(()),
            },
            Report::Contraction(r) => fail(r.passes(), "contraction bound"),
            Report::Khasminskii(r) => {
                fail(r.decreasing, "gaps do not decrease along the ladder")?;
                fail(r.all_within, "a gap exceeds its allowance")
            }
            Report::Moments(r) => fail(r.uniform, "moments are not uniform in epsilon"),
        }
    }
}

/// Which experiments a subcommand may run; the first entry is its default.
pub fn kinds_for(command: &str) -> &'static [ExperimentKind] {
    use ExperimentKind::*;
    match command {
        "converge" => &[Converge, GheatOracle, MaxOracle],
        "findim" => &[Findim],
        "generator" => &[Generator],
        "solve" => &[Solve],
        "simulate" => &[Simulate],
        "contraction" => &[Contraction],
        "khasminskii" => &[Khasminskii],
        "moments" => &[Moments],
        _ => &[],
    }
}

/// Runs one experiment after validating the configuration for it.
pub fn run(cfg: &ExperimentConfig, kind: ExperimentKind) -> AppResult<(Report, f64)> {
    cfg.validate_for(kind)?;
    let clock = Instant::now();
    let report = match kind {
        ExperimentKind::Converge => Report::Converge(Box::new(run_converge(cfg)?)),
        ExperimentKind::GheatOracle => Report::GheatOracle(Box::new(run_gheat_oracle(cfg)?)),
        ExperimentKind::MaxOracle => Report::MaxOracle(Box::new(run_max_oracle(cfg)?)),
        ExperimentKind::Findim => Report::Findim(Box::new(run_findim(cfg)?)),
        ExperimentKind::Generator => Report::Generator(Box::new(run_generator(cfg)?)),
        ExperimentKind::Contraction => Report::Contraction(Box::new(run_contraction(cfg)?)),
        ExperimentKind::Khasminskii => Report::Khasminskii(Box::new(run_khasminskii(cfg)?)),
        ExperimentKind::Moments => Report::Moments(Box::new(run_moments(cfg)?)),
        ExperimentKind::Solve => Report::Solve(Box::new(run_solve(cfg)?)),
        ExperimentKind::Simulate => Report::Simulate(Box::new(run_simulate(cfg)?)),
    };
    Ok((report, clock.elapsed().as_secs_f64()))
}
