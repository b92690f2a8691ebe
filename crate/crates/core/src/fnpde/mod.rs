//! Monotone explicit finite-difference solvers for the two-scale PDE, the
//! G-heat equation and the averaged PDE.
//!
//! All solvers march forward in time `u(0) = φ`, `∂_t u = F(u)`, store a fixed
//! number of evenly spaced slices and keep the stepper so that any stored
//! solve can be resumed (see [`dpp_check`]).

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::error::{Error, Result};

mod averaged;
pub(crate) mod scheme1d;
mod two_scale;

pub use averaged::{solve_averaged, solve_averaged_from, AveragedStepper};
pub use scheme1d::{solve_gheat_1d, NodeCoef, Scheme1D};
pub use two_scale::{solve_two_scale, solve_two_scale_from, two_scale_dt_max, StencilPlan};

/// A uniform axis with `nodes` points from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::invalid("an axis needs at least 3 nodes"));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("axis bounds must be finite with lo < hi"));
        }
        Ok(Axis { lo, hi, nodes })
    }

    /// Axis with spacing close to `h` covering `[lo, hi]`.
    pub fn with_spacing(lo: f64, hi: f64, h: f64) -> Result<Self> {
        let cells = libm::ceil((hi - lo) / h - 1e-9).max(2.0) as usize;
        Axis::new(lo, hi, cells + 1)
    }

    /// Symmetric axis `[-half, half]` with exactly spacing `h` (half is rounded up).
    pub fn symmetric(half: f64, h: f64) -> Result<Self> {
        let k = libm::ceil(half / h - 1e-9).max(1.0) as usize;
        let half = k as f64 * h;
        Axis::new(-half, half, 2 * k + 1)
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.hi
        } else {
            self.lo + i as f64 * self.h()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    /// Cell index and weight for linear interpolation; `None` outside the axis.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x >= self.lo - 1e-12 && x <= self.hi + 1e-12) {
            return None;
        }
        let s = ((x - self.lo) / self.h()).clamp(0.0, (self.nodes - 1) as f64);
        let i = (libm::floor(s) as usize).min(self.nodes - 2);
        Some((i, s - i as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// Largest stable step compatible with the snapshot layout.
    Cfl,
    /// A user step; rejected if it exceeds the stability limit.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Copy-out ghost nodes (zero normal derivative).
    Neumann,
    /// Ghost `3u_b − 3u_{b−1} + u_{b−2}`; exact for quadratics. 1-D solvers only.
    QuadraticExtrapolation,
}

/// Grid, time step policy and output layout of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub slow: Axis,
    pub fast: Option<Axis>,
    pub horizon: f64,
    pub time_step: TimeStep,
    /// Nodes next to the boundary excluded from reported norms.
    pub boundary_margin: usize,
    /// Number of stored intervals; slices at `k·T/snapshots`.
    pub snapshots: usize,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(slow: Axis, fast: Option<Axis>, horizon: f64, boundary_margin: usize) -> Result<Self> {
        let spec = GridSpec {
            slow,
            fast,
            horizon,
            time_step: TimeStep::Cfl,
            boundary_margin,
            snapshots: 20,
            boundary: Boundary::Neumann,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon must be positive"));
        }
        if let TimeStep::Fixed(dt) = self.time_step {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid("dt must be positive"));
            }
        }
        if self.snapshots == 0 {
            return Err(Error::invalid("snapshots must be at least 1"));
        }
        for ax in core::iter::once(&self.slow).chain(self.fast.as_ref()) {
            if ax.nodes <= 2 * self.boundary_margin {
                return Err(Error::invalid("interior is empty after removing the boundary margin"));
            }
        }
        Ok(())
    }

    pub fn with_time_step(mut self, ts: TimeStep) -> Result<Self> {
        self.time_step = ts;
        self.validate()?;
        Ok(self)
    }

    pub fn with_snapshots(mut self, k: usize) -> Result<Self> {
        self.snapshots = k;
        self.validate()?;
        Ok(self)
    }

    pub fn with_boundary(mut self, b: Boundary) -> Self {
        self.boundary = b;
        self
    }

    pub fn fast_nodes(&self) -> usize {
        self.fast.map_or(1, |a| a.nodes)
    }

    pub fn len(&self) -> usize {
        self.slow.nodes * self.fast_nodes()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Step count and step size for a stability limit `dt_max`.
    pub fn schedule(&self, dt_max: f64) -> Result<(usize, f64)> {
        let t = self.horizon;
        match self.time_step {
            TimeStep::Cfl => {
                let k = self.snapshots;
                let n = libm::ceil(t / dt_max - 1e-9).max(1.0) as usize;
                let n = n.div_ceil(k) * k;
                Ok((n, t / n as f64))
            }
            TimeStep::Fixed(dt) => {
                if dt > dt_max * (1.0 + 1e-12) {
                    return Err(Error::Cfl { dt, limit: dt_max });
                }
                let n = libm::round(t / dt).max(1.0) as usize;
                if (n as f64 * dt - t).abs() > 1e-9 * t {
                    return Err(Error::invalid("fixed dt must divide the horizon"));
                }
                Ok((n, dt))
            }
        }
    }
}

/// One explicit step of a monotone scheme. Implementations read `prev` only.
pub trait Stepper: fmt::Debug + Send + Sync {
    fn len(&self) -> usize;
    /// Computes `next` from `prev`; entries are independent of each other.
    fn step(&self, prev: &[f64], next: &mut [f64]);
    fn dt(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    TwoScale,
    GHeat,
    Averaged,
    Fast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub step: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub dt: f64,
    pub steps: usize,
    /// Largest `|u^{n+1} − u^n|` over the run.
    pub max_update: f64,
    /// `dt` divided by the stability limit.
    pub cfl_ratio: f64,
    /// Largest artificial viscosity added on either axis.
    pub viscosity_max: f64,
    pub wall_time_s: f64,
}

/// Stored slices of a solve plus the scheme that produced them.
#[derive(Clone)]
pub struct GridSolution {
    pub spec: GridSpec,
    pub kind: SolutionKind,
    pub epsilon: Option<f64>,
    pub slices: Vec<Slice>,
    pub diagnostics: Diagnostics,
    stepper: Arc<dyn Stepper>,
}

impl fmt::Debug for GridSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSolution")
            .field("kind", &self.kind)
            .field("epsilon", &self.epsilon)
            .field("slices", &self.slices.len())
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

impl GridSolution {
    pub fn steps(&self) -> usize {
        self.diagnostics.steps
    }

    pub fn dt(&self) -> f64 {
        self.diagnostics.dt
    }

    pub fn last(&self) -> &Slice {
        self.slices.last().expect("a solution has at least one slice")
    }

    pub fn stepper(&self) -> &Arc<dyn Stepper> {
        &self.stepper
    }

    /// Depth of the boundary-influence zone at `step`.
    pub fn mask_depth(&self, step: usize) -> usize {
        step.min(self.spec.boundary_margin)
    }

    /// Slow-axis node range outside the influence zone at `step`.
    pub fn interior_slow(&self, step: usize) -> Range<usize> {
        let m = self.mask_depth(step);
        m..self.spec.slow.nodes - m
    }

    /// Fast-axis node range outside the influence zone (`0..1` for 1-D solves).
    pub fn interior_fast(&self, step: usize) -> Range<usize> {
        match self.spec.fast {
            Some(ax) => {
                let m = self.mask_depth(step);
                m..ax.nodes - m
            }
            None => 0..1,
        }
    }

    pub fn is_interior(&self, step: usize, i: usize, j: usize) -> bool {
        self.interior_slow(step).contains(&i) && self.interior_fast(step).contains(&j)
    }

    pub fn value(&self, slice: &Slice, i: usize, j: usize) -> f64 {
        slice.values[i * self.spec.fast_nodes() + j]
    }

    /// Stored slice at time `t` (within a relative `1e-9` of the horizon).
    pub fn slice_at(&self, t: f64) -> Option<&Slice> {
        let tol = 1e-9 * self.spec.horizon;
        self.slices.iter().find(|s| (s.t - t).abs() <= tol)
    }

    /// Linear interpolation along the slow axis at fast node `j`.
    pub fn interp_slow(&self, slice: &Slice, j: usize, x: f64) -> Option<f64> {
        let (i, w) = self.spec.slow.locate(x)?;
        let a = self.value(slice, i, j);
        let b = self.value(slice, i + 1, j);
        Some(a + w * (b - a))
    }

    /// Fast node nearest to `y`.
    pub fn nearest_fast(&self, y: f64) -> usize {
        match self.spec.fast {
            Some(ax) => {
                let k = libm::round((y - ax.lo) / ax.h());
                (k.max(0.0) as usize).min(ax.nodes - 1)
            }
            None => 0,
        }
    }

    /// Marches `steps` further steps from `values`, which must be a state of this solve.
    pub fn resume(&self, values: &[f64], steps: usize) -> Result<Vec<f64>> {
        let mut cur = values.to_vec();
        let mut next = alloc::vec![0.0; cur.len()];
        for s in 0..steps {
            self.stepper.step(&cur, &mut next);
            check_finite(&next, s)?;
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }
}

fn check_finite(v: &[f64], step: usize) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(node) => Err(Error::NonFiniteSolution { node, step }),
        None => Ok(()),
    }
}

#[cfg(feature = "std")]
struct Clock(std::time::Instant);

#[cfg(feature = "std")]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(not(feature = "std"))]
struct Clock;

#[cfg(not(feature = "std"))]
impl Clock {
    fn start() -> Self {
        Clock
    }
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Runs a stepper from `init` for `steps` steps, storing `snapshots + 1` slices.
pub(crate) fn march(
    spec: &GridSpec,
    kind: SolutionKind,
    epsilon: Option<f64>,
    stepper: Arc<dyn Stepper>,
    init: Vec<f64>,
    steps: usize,
    mut diagnostics: Diagnostics,
) -> Result<GridSolution> {
    let clock = Clock::start();
    check_finite(&init, 0)?;
    let dt = stepper.dt();
    let k = spec.snapshots.min(steps).max(1);
    let stored: Vec<usize> = (0..=k).map(|j| (2 * j * steps + k) / (2 * k)).collect();
    let mut slices = Vec::with_capacity(stored.len());
    slices.push(Slice { step: 0, t: 0.0, values: init.clone() });
    let mut cur = init;
    let mut next = alloc::vec![0.0; cur.len()];
    let mut max_update: f64 = 0.0;
    let mut cursor = 1;
    for s in 1..=steps {
        stepper.step(&cur, &mut next);
        for (node, (a, b)) in next.iter().zip(&cur).enumerate() {
            let d = (a - b).abs();
            if !d.is_finite() {
                return Err(Error::NonFiniteSolution { node, step: s });
            }
            max_update = max_update.max(d);
        }
        core::mem::swap(&mut cur, &mut next);
        if cursor < stored.len() && stored[cursor] == s {
            let t = if s == steps { spec.horizon } else { s as f64 * dt };
            slices.push(Slice { step: s, t, values: cur.clone() });
            cursor += 1;
        }
    }
    diagnostics.dt = dt;
    diagnostics.steps = steps;
    diagnostics.max_update = max_update;
    diagnostics.wall_time_s = clock.seconds();
    Ok(GridSolution { spec: spec.clone(), kind, epsilon, slices, diagnostics, stepper })
}

/// Re-marches the last `delta_steps` steps from the state at `N − delta_steps`
/// and returns the largest deviation from the stored final slice.
pub fn dpp_check(sol: &GridSolution, delta_steps: usize) -> Result<f64> {
    let n = sol.steps();
    if delta_steps == 0 {
        return Ok(0.0);
    }
    if delta_steps >= n {
        return Err(Error::invalid("delta_steps must be smaller than the step count"));
    }
    let target = n - delta_steps;
    let base = sol
        .slices
        .iter()
        .rev()
        .find(|s| s.step <= target)
        .expect("slice at step 0 is always stored");
    let start = sol.resume(&base.values, target - base.step)?;
    let end = sol.resume(&start, delta_steps)?;
    Ok(end.iter().zip(&sol.last().values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}
