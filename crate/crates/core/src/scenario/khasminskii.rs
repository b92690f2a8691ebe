//! Block-frozen fast process: on `[lδ, (l+1)δ)` the fast equation sees the
//! slow state taken at `lδ`; it is driven by the same noise as the batch.

use alloc::vec::Vec;

use super::{fast_step, mean_se, normal, path_rng, slow_step, ScenarioBatch};
use crate::error::{Error, Result};
use crate::par;
use crate::system::{audit_hypotheses, SampleBox};

/// `δ = ε·(ln 1/ε)^{1/4}`.
pub fn delta_m(eps: f64) -> f64 {
    eps * libm::pow(libm::log(1.0 / eps), 0.25)
}

/// `ρ = C·k·δ²·exp(C·k·δ)` with `k = δ/ε² + 1/ε`.
pub fn rho_m(eps: f64, delta: f64, c: f64) -> f64 {
    let k = delta / (eps * eps) + 1.0 / eps;
    c * k * delta * delta * libm::exp(c * k * delta)
}

/// Multiplier on the gate for Monte Carlo noise.
pub const MC_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenBatch {
    pub base: ScenarioBatch,
    pub delta_m: f64,
    pub steps_per_block: usize,
    /// `X̄^D` at the batch's recorded times.
    pub frozen: Vec<Vec<f64>>,
    /// `(t, mean |X̄ − X̄^D|², SE)` at recorded times.
    pub gap_history: Vec<(f64, f64, f64)>,
    /// Largest mean square gap over recorded times.
    pub gap: f64,
    pub gap_se: f64,
    /// `4·(L₁ + L₂)` from the audit.
    pub c_guess: f64,
    pub rho_m: f64,
    /// `(1 + |x̃₀|²)·ρ_m·MC_FACTOR`.
    pub allowed: f64,
    pub passes: bool,
}

pub fn khasminskii_freeze(batch: &ScenarioBatch) -> Result<FrozenBatch> {
    let sys = &batch.sys;
    let st = &batch.settings;
    let eps = sys.epsilon;
    if !(eps < 1.0) {
        return Err(Error::invalid("the freezing schedule needs epsilon < 1"));
    }
    let delta = delta_m(eps);
    if st.horizon < delta {
        return Err(Error::invalid("batch horizon is shorter than one freezing block"));
    }
    let n = st.steps();
    let dt = st.horizon / n as f64;
    let per_block = (libm::round(delta / dt) as usize).max(1);
    let sq = libm::sqrt(dt);

    let frozen = par::map_indexed(batch.len(), |k| -> Result<Vec<f64>> {
        let mut rng = path_rng(st.seed, k);
        let (mut x, mut y, mut yd) = (st.x0, st.y0, st.y0);
        let mut x_block = x;
        let mut rec = Vec::with_capacity(batch.times.len());
        rec.push(yd);
        for s in 1..=n {
            if (s - 1) % per_block == 0 {
                x_block = x;
            }
            let gamma = batch.policy.gamma(st.time(s - 1), x, y);
            let dw = libm::sqrt(gamma) * sq * normal(&mut rng);
            let xn = slow_step(sys, x, y, gamma, dt, dw)?;
            let yn = fast_step(sys, x, y, gamma, dt, dw, eps)?;
            yd = fast_step(sys, x_block, yd, gamma, dt, dw, eps)?;
            if !(xn.is_finite() && yn.is_finite() && yd.is_finite()) {
                return Err(Error::NonFiniteState { path: k, step: s });
            }
            (x, y) = (xn, yn);
            if s % st.record_every == 0 || s == n {
                rec.push(yd);
            }
        }
        Ok(rec)
    });
    let frozen = frozen.into_iter().collect::<Result<Vec<_>>>()?;

    let mut gap_history = Vec::with_capacity(batch.times.len());
    let (mut gap, mut gap_se) = (0.0f64, 0.0);
    for (r, &t) in batch.times.iter().enumerate() {
        let sq_gaps: Vec<f64> = batch
            .paths
            .iter()
            .zip(&frozen)
            .map(|(p, f)| {
                let d = p[r].1 - f[r];
                d * d
            })
            .collect();
        let (m, se) = mean_se(&sq_gaps);
        if m > gap {
            gap = m;
            gap_se = se;
        }
        gap_history.push((t, m, se));
    }

    let r = 5.0 / libm::sqrt(sys.eta_claimed.max(1e-3));
    let bx = SampleBox { slow: (st.x0 - 5.0, st.x0 + 5.0), fast: (st.y0.min(0.0) - r, st.y0.max(0.0) + r) };
    let audit = audit_hypotheses(sys, bx, 200, st.seed)?;
    let c_guess = 4.0 * (audit.measured_lip + audit.fast_drift_lip);
    let rho = rho_m(eps, delta, c_guess);
    let allowed = (1.0 + st.x0 * st.x0) * rho * MC_FACTOR;
    Ok(FrozenBatch {
        base: batch.clone(),
        delta_m: delta,
        steps_per_block: per_block,
        frozen,
        gap_history,
        gap,
        gap_se,
        c_guess,
        rho_m: rho,
        allowed,
        passes: gap <= allowed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcore::GFunction;
    use crate::scenario::{simulate, ControlPolicy, SimSettings};
    use crate::system::SystemSource;

    #[test]
    fn schedule_formula() {
        // 0.01 · (ln 100)^{1/4}
        assert!((delta_m(0.01) - 0.0146491).abs() < 1e-7);
    }

    #[test]
    fn slow_free_fast_equation_is_unchanged() {
        let sys = SystemSource::scalar("0.5 + 0.5*tanh(y1)", "-y1", "1", "0.5", "x1")
            .epsilon(0.1)
            .build(GFunction::interval(1.0, 4.0).unwrap())
            .unwrap();
        let st = SimSettings::new(50, 0.002, 0.5, 3).record_every(10);
        let b = simulate(&sys, &ControlPolicy::Constant(2.0), &st).unwrap();
        let f = khasminskii_freeze(&b).unwrap();
        assert_eq!(f.gap, 0.0);
        assert!(f.passes);
    }
}
