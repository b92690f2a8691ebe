use std::sync::Arc;

use gavg_core::ergogen::{
    cesaro_lambda, discounted_ladder, fast_axis_spec, rate_bound_check, DiscountedLadder, FrozenFastProblem,
    GeneratorSample, GeneratorTable, PropertyReport, RateReport, TableOptions,
};

use super::obtain_table;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::AppResult;

/// Both routes to the ergodic constant at one `(x̃, p, A)`.
#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub sample: GeneratorSample,
    pub ladder: DiscountedLadder,
    pub rate: RateReport,
}

#[derive(Debug, Clone)]
pub struct GeneratorReport {
    pub table: Option<Arc<GeneratorTable>>,
    pub properties: Option<PropertyReport>,
    pub probes: Vec<ProbeRow>,
}

pub fn run_generator(cfg: &ExperimentConfig) -> AppResult<GeneratorReport> {
    cfg.validate_for(ExperimentKind::Generator)?;
    let (table, properties) = match &cfg.table {
        Some(_) => {
            let t = obtain_table(cfg)?;
            let p = t.check_properties(cfg.property_trials, cfg.seed);
            (Some(Arc::new(t)), Some(p))
        }
        None => (None, None),
    };

    let opts = cfg.table.as_ref().map_or_else(|| TableOptions::new(32, 20.0), |t| t.options.clone());
    let spec = fast_axis_spec(cfg.system.eta_claimed, opts.fast_h, &opts.starts, opts.horizon)?;
    let mut probes = Vec::with_capacity(cfg.probes.len());
    for &[x, p, a] in &cfg.probes {
        let fp = FrozenFastProblem::new(&cfg.system, x, p, a)?;
        let sample = cesaro_lambda(&fp, opts.horizon, &spec, &opts.starts)?;
        let ladder = discounted_ladder(&fp, &opts.alpha_ladder, &spec)?;
        let rate = rate_bound_check(&sample)?;
        probes.push(ProbeRow { sample, ladder, rate });
    }
    Ok(GeneratorReport { table, properties, probes })
}
