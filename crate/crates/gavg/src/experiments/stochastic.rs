use gavg_core::scenario::{
    contraction_test, delta_m, khasminskii_freeze, moment_probe, simulate, ContractionReport, MomentReport, ScenarioBatch,
};

use super::decreasing;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::AppResult;

pub fn run_contraction(cfg: &ExperimentConfig) -> AppResult<ContractionReport> {
    cfg.validate_for(ExperimentKind::Contraction)?;
    let s = &cfg.sim;
    Ok(contraction_test(&cfg.system, &s.policy, s.x0, s.ya, s.yb, &s.t_checks, s.paths, s.dt_for(1.0)?, cfg.seed)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhasminskiiRow {
    pub epsilon: f64,
    pub delta: f64,
    pub steps_per_block: usize,
    pub gap: f64,
    pub gap_se: f64,
    pub c_guess: f64,
    pub rho: f64,
    pub allowed: f64,
    pub passes: bool,
}

#[derive(Debug, Clone)]
pub struct KhasminskiiReport {
    pub rows: Vec<KhasminskiiRow>,
    pub decreasing: bool,
    pub all_within: bool,
}

/// Block-frozen fast equation against the coupled one along the ladder.
pub fn run_khasminskii(cfg: &ExperimentConfig) -> AppResult<KhasminskiiReport> {
    cfg.validate_for(ExperimentKind::Khasminskii)?;
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    for &eps in &cfg.ladder {
        let sys = cfg.system.with_epsilon(eps)?;
        let batch = simulate(&sys, &cfg.sim.policy, &cfg.sim.settings(eps, cfg.seed)?)?;
        let f = khasminskii_freeze(&batch)?;
        rows.push(KhasminskiiRow {
            epsilon: eps,
            delta: delta_m(eps),
            steps_per_block: f.steps_per_block,
            gap: f.gap,
            gap_se: f.gap_se,
            c_guess: f.c_guess,
            rho: f.rho_m,
            allowed: f.allowed,
            passes: f.passes,
        });
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    Ok(KhasminskiiReport { decreasing: decreasing(&gaps), all_within: rows.iter().all(|r| r.passes), rows })
}

/// Moment bounds along the ladder, one step size for every ε (the smallest ε sets it).
pub fn run_moments(cfg: &ExperimentConfig) -> AppResult<MomentReport> {
    cfg.validate_for(ExperimentKind::Moments)?;
    let smallest = cfg.ladder[cfg.ladder.len() - 1];
    let policies = if cfg.sim.policies.is_empty() { vec![cfg.sim.policy.clone()] } else { cfg.sim.policies.clone() };
    Ok(moment_probe(&cfg.system, &policies, &cfg.ladder, &cfg.sim.settings(smallest, cfg.seed)?)?)
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub batch: ScenarioBatch,
    /// Mean and standard error of `φ(X̃_T)`.
    pub phi_mean: (f64, f64),
}

pub fn run_simulate(cfg: &ExperimentConfig) -> AppResult<SimulationReport> {
    cfg.validate_for(ExperimentKind::Simulate)?;
    let batch = simulate(&cfg.system, &cfg.sim.policy, &cfg.sim.settings(cfg.system.epsilon, cfg.seed)?)?;
    let phi_mean = batch.phi_mean();
    Ok(SimulationReport { batch, phi_mean })
}
