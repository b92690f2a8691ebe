//! Seven-point monotone stencil for the two-scale PDE in one slow and one
//! fast dimension.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::scheme1d::{sample_phi, upwind};
use super::{march, Boundary, Diagnostics, GridSolution, GridSpec, SolutionKind, Stepper};
use crate::error::{Error, Result};
use crate::gcore::ScalarG;
use crate::par;
use crate::system::TwoScaleSystem;

/// Neighbour slots: slow+, slow−, fast+, fast−, diagonal, anti-diagonal.
const SLOTS: usize = 6;

/// Per-node stencil weights. Second-order and h-terms enter the argument of
/// G; the drift enters outside G. Neighbour indices are clamped at the
/// boundary, which realizes copy-out ghost nodes.
#[derive(Debug, Clone)]
pub struct StencilPlan {
    pub n_slow: usize,
    pub n_fast: usize,
    neighbours: Vec<u32>,
    weights: Vec<f64>,
    drift: Vec<f64>,
    /// Nodes with a negative off-centre weight after assembly.
    pub violations: usize,
    pub viscosity_max: f64,
    /// Largest diagonal rate `(cap/2)·Σw + Σ drift weights`.
    pub rate_max: f64,
}

impl StencilPlan {
    pub fn assemble(sys: &TwoScaleSystem, spec: &GridSpec) -> Result<Self> {
        sys.require_scalar()?;
        let fast = spec.fast.ok_or_else(|| Error::invalid("two-scale solve needs a fast axis"))?;
        let (ns, nf) = (spec.slow.nodes, fast.nodes);
        let (hs, hf) = (spec.slow.h(), fast.h());
        let eps = sys.epsilon;
        let rt = libm::sqrt(eps);
        let cap = sys.g.nondegeneracy_cap();
        let n = ns * nf;
        let mut plan = StencilPlan {
            n_slow: ns,
            n_fast: nf,
            neighbours: Vec::with_capacity(n * SLOTS),
            weights: Vec::with_capacity(n * SLOTS),
            drift: Vec::with_capacity(n * 4),
            violations: 0,
            viscosity_max: 0.0,
            rate_max: 0.0,
        };
        let idx = |i: usize, j: usize| (i * nf + j) as u32;
        for i in 0..ns {
            let x = spec.slow.x(i);
            let (ip, im) = ((i + 1).min(ns - 1), i.saturating_sub(1));
            for j in 0..nf {
                let y = fast.x(j);
                let (jp, jm) = ((j + 1).min(nf - 1), j.saturating_sub(1));
                let c = sys.coeffs1(x, y)?;
                let a11 = c.sigma_tilde * c.sigma_tilde;
                let a12 = c.sigma_tilde * c.sigma_bar / rt;
                let a22 = c.sigma_bar * c.sigma_bar / eps;
                let cross = a12.abs() / (hs * hf);
                let nu_s = (a12.abs() * hs / hf - a11).max(0.0);
                let nu_f = (a12.abs() * hf / hs - a22).max(0.0);
                plan.viscosity_max = plan.viscosity_max.max(nu_s).max(nu_f);
                let ax_s = clamp_rounding((a11 + nu_s) / (hs * hs) - cross, cross);
                let ax_f = clamp_rounding((a22 + nu_f) / (hf * hf) - cross, cross);
                let (hsp, hsm) = upwind(2.0 * c.h_tilde, hs);
                let (hfp, hfm) = upwind(2.0 * c.h_bar / eps, hf);
                let w = [ax_s + hsp, ax_s + hsm, ax_f + hfp, ax_f + hfm, cross, cross];
                if w.iter().any(|v| *v < 0.0) {
                    plan.violations += 1;
                }
                let (d1, d2) = if a12 >= 0.0 { (idx(ip, jp), idx(im, jm)) } else { (idx(ip, jm), idx(im, jp)) };
                plan.neighbours.extend_from_slice(&[idx(ip, j), idx(im, j), idx(i, jp), idx(i, jm), d1, d2]);
                plan.weights.extend_from_slice(&w);
                let (bsp, bsm) = upwind(c.b_tilde, hs);
                let (bfp, bfm) = upwind(c.b_bar / eps, hf);
                plan.drift.extend_from_slice(&[bsp, bsm, bfp, bfm]);
                let rate = 0.5 * cap * w.iter().sum::<f64>() + bsp + bsm + bfp + bfm;
                plan.rate_max = plan.rate_max.max(rate);
            }
        }
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.n_slow * self.n_fast
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weights of node `c` inside G, in slot order.
    pub fn weights(&self, c: usize) -> &[f64] {
        &self.weights[c * SLOTS..(c + 1) * SLOTS]
    }

    pub fn dt_max(&self) -> f64 {
        if self.rate_max > 0.0 {
            0.9 / self.rate_max
        } else {
            f64::INFINITY
        }
    }
}

/// Differences of order rounding error are set to zero; larger negatives stay.
fn clamp_rounding(v: f64, scale: f64) -> f64 {
    if v < 0.0 && v > -1e-12 * scale.max(1.0) {
        0.0
    } else {
        v
    }
}

#[derive(Debug)]
struct TwoScaleStepper {
    plan: StencilPlan,
    g: ScalarG,
    dt: f64,
}

impl TwoScaleStepper {
    #[inline]
    fn node(&self, prev: &[f64], c: usize) -> f64 {
        let u = prev[c];
        let nb = &self.plan.neighbours[c * SLOTS..(c + 1) * SLOTS];
        let w = &self.plan.weights[c * SLOTS..(c + 1) * SLOTS];
        let dr = &self.plan.drift[c * 4..(c + 1) * 4];
        let mut d = [0.0; SLOTS];
        for k in 0..SLOTS {
            d[k] = prev[nb[k] as usize] - u;
        }
        let m = w[0] * d[0] + w[1] * d[1] + w[2] * d[2] + w[3] * d[3] + w[4] * d[4] + w[5] * d[5];
        let b = dr[0] * d[0] + dr[1] * d[1] + dr[2] * d[2] + dr[3] * d[3];
        u + self.dt * (self.g.apply(m) + b)
    }
}

impl Stepper for TwoScaleStepper {
    fn len(&self) -> usize {
        self.plan.len()
    }

    fn step(&self, prev: &[f64], next: &mut [f64]) {
        let chunk = self.plan.n_fast * 16;
        par::fill_chunks(next, chunk, |start, slab| {
            for (k, out) in slab.iter_mut().enumerate() {
                *out = self.node(prev, start + k);
            }
        });
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// Solves `∂_t u = G(M) + b̃ u_x̃ + (b̄/ε) u_x̄` with `u(0) = φ(x̃)` where
/// `M = ã₁₁u_x̃x̃ + 2ã₁₂u_x̃x̄ + ã₂₂u_x̄x̄ + 2(h̃ u_x̃ + (h̄/ε) u_x̄)`.
pub fn solve_two_scale(sys: &TwoScaleSystem, spec: &GridSpec) -> Result<GridSolution> {
    let nf = spec.fast_nodes();
    let row = sample_phi(&sys.phi, &spec.slow)?;
    let init: Vec<f64> = row.iter().flat_map(|v| core::iter::repeat_n(*v, nf)).collect();
    solve_two_scale_from(sys, spec, init)
}

/// As [`solve_two_scale`] from a nodal datum `init[i * n_fast + j]`.
pub fn solve_two_scale_from(sys: &TwoScaleSystem, spec: &GridSpec, init: Vec<f64>) -> Result<GridSolution> {
    if spec.boundary != Boundary::Neumann {
        return Err(Error::Unsupported("two-scale solves use copy-out Neumann boundaries".into()));
    }
    if init.len() != spec.len() {
        return Err(Error::DimensionMismatch { expected: spec.len(), found: init.len() });
    }
    let plan = StencilPlan::assemble(sys, spec)?;
    if plan.violations > 0 {
        return Err(Error::Monotonicity { count: plan.violations });
    }
    let dt_max = plan.dt_max();
    let (steps, dt) = spec.schedule(dt_max)?;
    let diag = Diagnostics { cfl_ratio: dt / dt_max, viscosity_max: plan.viscosity_max, ..Diagnostics::default() };
    let stepper = TwoScaleStepper { plan, g: sys.g.scalar_form()?, dt };
    march(spec, SolutionKind::TwoScale, Some(sys.epsilon), Arc::new(stepper), init, steps, diag)
}

/// Stability limit of the two-scale scheme on `spec`.
pub fn two_scale_dt_max(sys: &TwoScaleSystem, spec: &GridSpec) -> Result<f64> {
    Ok(StencilPlan::assemble(sys, spec)?.dt_max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnpde::{dpp_check, Axis};
    use crate::gcore::GFunction;
    use crate::system::SystemSource;

    fn sys(phi: &str, eps: f64) -> TwoScaleSystem {
        SystemSource::scalar("0.5 + 0.5*tanh(y1)", "-y1", "1 + 0.25*tanh(y1)", "0.5*tanh(y1)", phi)
            .epsilon(eps)
            .constants(0.5, 1.0, 1.5)
            .build(GFunction::interval(1.0, 4.0).unwrap())
            .unwrap()
    }

    fn spec() -> GridSpec {
        GridSpec::new(Axis::new(-2.0, 2.0, 41).unwrap(), Some(Axis::new(-3.0, 3.0, 31).unwrap()), 0.1, 3).unwrap()
    }

    #[test]
    fn plan_is_monotone() {
        let plan = StencilPlan::assemble(&sys("x1", 0.1), &spec()).unwrap();
        assert_eq!(plan.violations, 0);
        for c in 0..plan.len() {
            assert!(plan.weights(c).iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn constants_preserved() {
        let sol = solve_two_scale(&sys("3", 0.2), &spec()).unwrap();
        for s in &sol.slices {
            assert!(s.values.iter().all(|v| *v == 3.0));
        }
    }

    #[test]
    fn initial_slice_is_phi() {
        let sol = solve_two_scale(&sys("tanh(x1)", 0.2), &spec()).unwrap();
        let s0 = &sol.slices[0];
        for i in 0..41 {
            for j in 0..31 {
                assert_eq!(sol.value(s0, i, j), libm::tanh(spec().slow.x(i)));
            }
        }
        assert!(dpp_check(&sol, 10).unwrap() <= 1e-12);
    }

    #[test]
    fn comparison_principle() {
        let lo = solve_two_scale(&sys("tanh(x1)", 0.2), &spec()).unwrap();
        let hi = solve_two_scale(&sys("tanh(x1) + 0.1*cos(x1)^2", 0.2), &spec()).unwrap();
        for (a, b) in lo.slices.iter().zip(&hi.slices) {
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x <= y));
        }
    }

    #[test]
    fn fixed_dt_above_limit_rejected() {
        let sp = spec().with_time_step(crate::fnpde::TimeStep::Fixed(0.05)).unwrap();
        assert!(matches!(solve_two_scale(&sys("x1", 0.1), &sp), Err(Error::Cfl { .. })));
    }
}
