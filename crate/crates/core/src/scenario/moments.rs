//! Moment bounds along an ε ladder and the fast time-rescaling check.

use alloc::vec::Vec;

use super::{fast_step, mean_se, normal, path_rng, simulate, ControlPolicy, SimSettings};
use crate::error::{Error, Result};
use crate::par;
use crate::system::TwoScaleSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub epsilon: f64,
    pub policy: usize,
    /// `sup_t E|X̃_t|²` over recorded times.
    pub slow_m2: f64,
    /// `sup_t E|X̄_t|²`.
    pub fast_m2: f64,
    /// Largest `E|X̃_t − X̃_s|² / |t − s|` over adjacent recorded times.
    pub holder: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    /// For every policy and statistic: max over ε ≤ 2·min over ε.
    pub uniform: bool,
}

fn within_band(v: &[f64]) -> bool {
    let max = v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let min = v.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    max <= 2.0 * min || max == 0.0
}

pub fn moment_probe(
    sys: &TwoScaleSystem,
    policies: &[ControlPolicy],
    eps_ladder: &[f64],
    st: &SimSettings,
) -> Result<MomentReport> {
    if policies.is_empty() || eps_ladder.is_empty() {
        return Err(Error::invalid("need at least one policy and one epsilon"));
    }
    let mut rows = Vec::new();
    for &eps in eps_ladder {
        let s = sys.with_epsilon(eps)?;
        for (pi, pol) in policies.iter().enumerate() {
            let b = simulate(&s, pol, st)?;
            let (mut slow_m2, mut fast_m2, mut holder) = (0.0f64, 0.0f64, 0.0f64);
            for r in 0..b.times.len() {
                let xs: Vec<f64> = b.paths.iter().map(|p| p[r].0 * p[r].0).collect();
                let ys: Vec<f64> = b.paths.iter().map(|p| p[r].1 * p[r].1).collect();
                slow_m2 = slow_m2.max(mean_se(&xs).0);
                fast_m2 = fast_m2.max(mean_se(&ys).0);
                if r > 0 {
                    let dt = b.times[r] - b.times[r - 1];
                    let inc: Vec<f64> = b.paths.iter().map(|p| (p[r].0 - p[r - 1].0) * (p[r].0 - p[r - 1].0)).collect();
                    holder = holder.max(mean_se(&inc).0 / dt);
                }
            }
            rows.push(MomentRow { epsilon: eps, policy: pi, slow_m2, fast_m2, holder });
        }
    }
    let mut uniform = true;
    for pi in 0..policies.len() {
        let of = |f: fn(&MomentRow) -> f64| -> Vec<f64> { rows.iter().filter(|r| r.policy == pi).map(f).collect() };
        uniform &= within_band(&of(|r| r.slow_m2)) && within_band(&of(|r| r.fast_m2)) && within_band(&of(|r| r.holder));
    }
    Ok(MomentReport { rows, uniform })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescalingRow {
    pub t: f64,
    pub mean_eps: f64,
    pub mean_aux: f64,
    pub m2_eps: f64,
    pub m2_aux: f64,
    /// Three combined standard errors per statistic.
    pub tol_mean: f64,
    pub tol_m2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescalingReport {
    pub rows: Vec<RescalingRow>,
    pub passes: bool,
}

/// Fast component of the ε-system at time t against the frozen auxiliary
/// equation (slow argument `x0`, unit scale) at time `t/ε`, both fed by the
/// same Gaussians.
pub fn time_rescaling_check(sys: &TwoScaleSystem, policy: &ControlPolicy, st: &SimSettings) -> Result<RescalingReport> {
    let batch = simulate(sys, policy, st)?;
    let eps = sys.epsilon;
    let n = st.steps();
    let dt = st.horizon / n as f64;
    let aux_dt = dt / eps;
    let sq = libm::sqrt(aux_dt);
    let aux = par::map_indexed(batch.len(), |k| -> Result<Vec<f64>> {
        let mut rng = path_rng(st.seed, k);
        let mut y = st.y0;
        let mut rec = Vec::with_capacity(batch.times.len());
        rec.push(y);
        for s in 1..=n {
            let gamma = policy.gamma(st.time(s - 1), st.x0, y);
            let dw = libm::sqrt(gamma) * sq * normal(&mut rng);
            y = fast_step(sys, st.x0, y, gamma, aux_dt, dw, 1.0)?;
            if !y.is_finite() {
                return Err(Error::NonFiniteState { path: k, step: s });
            }
            if s % st.record_every == 0 || s == n {
                rec.push(y);
            }
        }
        Ok(rec)
    });
    let aux = aux.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(batch.times.len());
    let mut passes = true;
    for (r, &t) in batch.times.iter().enumerate() {
        let ye: Vec<f64> = batch.paths.iter().map(|p| p[r].1).collect();
        let ya: Vec<f64> = aux.iter().map(|p| p[r]).collect();
        let sqr = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x * x).collect() };
        let ((me, se_e), (ma, se_a)) = (mean_se(&ye), mean_se(&ya));
        let ((qe, sq_e), (qa, sq_a)) = (mean_se(&sqr(&ye)), mean_se(&sqr(&ya)));
        let tol_mean = 3.0 * libm::sqrt(se_e * se_e + se_a * se_a) + 1e-9;
        let tol_m2 = 3.0 * libm::sqrt(sq_e * sq_e + sq_a * sq_a) + 1e-9;
        passes &= (me - ma).abs() <= tol_mean && (qe - qa).abs() <= tol_m2;
        rows.push(RescalingRow { t, mean_eps: me, mean_aux: ma, m2_eps: qe, m2_aux: qa, tol_mean, tol_m2 });
    }
    Ok(RescalingReport { rows, passes })
}
