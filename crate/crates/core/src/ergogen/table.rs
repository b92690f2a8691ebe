//! Unit-circle tabulation of the averaged generator G̃(x̃, p, A).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{cesaro_lambda, discounted_lambda, fast_axis_spec, FrozenFastProblem, GeneratorSample, DEFAULT_ALPHAS, DEFAULT_STARTS};
use crate::error::{Error, Result};
use crate::par;
use crate::system::{audit_hypotheses, AuditStatus, SampleBox, TwoScaleSystem};

/// Build parameters for [`build_table_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableOptions {
    pub n_directions: usize,
    pub horizon: f64,
    /// Fast-axis spacing of the ergodic solves.
    pub fast_h: f64,
    pub starts: Vec<f64>,
    pub alpha_ladder: Vec<f64>,
    /// Share of samples cross-checked with the discounted route.
    pub cross_check_fraction: f64,
    pub seed: u64,
}

impl TableOptions {
    pub fn new(n_directions: usize, horizon: f64) -> Self {
        TableOptions {
            n_directions,
            horizon,
            fast_h: 0.05,
            starts: DEFAULT_STARTS.to_vec(),
            alpha_ladder: DEFAULT_ALPHAS.to_vec(),
            cross_check_fraction: 0.1,
            seed: 0,
        }
    }
}

/// G̃ stored on `x_grid × {unit directions}`; evaluation is linear in x̃ and
/// conic (barycentric between adjacent directions) in (p, A), which keeps
/// positive homogeneity exact.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTable {
    x_grid: Vec<f64>,
    n_directions: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    /// Row-major `[ix * n_directions + k]`.
    values: Vec<f64>,
    pub samples: Vec<GeneratorSample>,
    pub eta: f64,
    pub horizon: f64,
}

fn directions(k: usize) -> (Vec<f64>, Vec<f64>) {
    let step = 2.0 * PI / k as f64;
    let mut c = Vec::with_capacity(k);
    let mut s = Vec::with_capacity(k);
    for i in 0..k {
        // Exact axis directions avoid rounding in cos(π/2) and friends.
        let (ci, si) = match (4 * i) % k {
            0 => match (4 * i) / k {
                0 => (1.0, 0.0),
                1 => (0.0, 1.0),
                2 => (-1.0, 0.0),
                _ => (0.0, -1.0),
            },
            _ => (libm::cos(i as f64 * step), libm::sin(i as f64 * step)),
        };
        c.push(ci);
        s.push(si);
    }
    (c, s)
}

impl GeneratorTable {
    pub fn from_parts(
        x_grid: Vec<f64>,
        n_directions: usize,
        values: Vec<f64>,
        samples: Vec<GeneratorSample>,
        eta: f64,
        horizon: f64,
    ) -> Result<Self> {
        if n_directions < 8 || n_directions % 4 != 0 {
            return Err(Error::invalid("direction count must be a multiple of 4 and at least 8"));
        }
        if x_grid.len() < 2 || x_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("x grid needs at least two strictly increasing nodes"));
        }
        if values.len() != x_grid.len() * n_directions {
            return Err(Error::DimensionMismatch { expected: x_grid.len() * n_directions, found: values.len() });
        }
        let (cos, sin) = directions(n_directions);
        Ok(GeneratorTable { x_grid, n_directions, cos, sin, values, samples, eta, horizon })
    }

    /// Tabulates a known generator `f(x, p, A)` on the unit circle.
    pub fn from_fn(x_grid: Vec<f64>, n_directions: usize, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let (cos, sin) = directions(n_directions);
        let mut values = Vec::with_capacity(x_grid.len() * n_directions);
        for &x in &x_grid {
            for k in 0..n_directions {
                values.push(f(x, cos[k], sin[k]));
            }
        }
        Self::from_parts(x_grid, n_directions, values, Vec::new(), 0.0, 0.0)
    }

    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    pub fn n_directions(&self) -> usize {
        self.n_directions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Unit direction `k` as `(p, A)`.
    pub fn direction(&self, k: usize) -> (f64, f64) {
        (self.cos[k], self.sin[k])
    }

    /// Stored value at node `ix`, direction `k`.
    pub fn stored(&self, ix: usize, k: usize) -> f64 {
        self.values[ix * self.n_directions + k]
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_grid[0], self.x_grid[self.x_grid.len() - 1])
    }

    /// Largest per-sample tolerance estimate (zero for tables built from functions).
    pub fn max_tolerance(&self) -> f64 {
        self.samples.iter().map(|s| s.tolerance_estimate).fold(0.0, f64::max)
    }

    /// Interpolation cell in x̃; `None` outside the grid.
    pub fn locate_x(&self, x: f64) -> Option<(usize, f64)> {
        let (lo, hi) = self.x_range();
        let tol = 1e-12 * (hi - lo);
        if !(x >= lo - tol && x <= hi + tol) {
            return None;
        }
        let i = self.x_grid.partition_point(|g| *g <= x).clamp(1, self.x_grid.len() - 1) - 1;
        let w = ((x - self.x_grid[i]) / (self.x_grid[i + 1] - self.x_grid[i])).clamp(0.0, 1.0);
        Some((i, w))
    }

    /// Cone index and barycentric weights of `(p, A)` in the direction fan.
    #[inline]
    fn cone(&self, p: f64, a: f64) -> (usize, f64, f64) {
        let k = self.n_directions;
        let mut theta = libm::atan2(a, p);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        let i = ((theta / (2.0 * PI / k as f64)) as usize).min(k - 1);
        let j = (i + 1) % k;
        let det = self.cos[i] * self.sin[j] - self.sin[i] * self.cos[j];
        let alpha = (p * self.sin[j] - a * self.cos[j]) / det;
        let beta = (self.cos[i] * a - self.sin[i] * p) / det;
        (i, alpha, beta)
    }

    /// Evaluation with a precomputed x̃ cell.
    #[inline]
    pub fn eval_cell(&self, ix: usize, w: f64, p: f64, a: f64) -> f64 {
        if p == 0.0 && a == 0.0 {
            return 0.0;
        }
        let (i, alpha, beta) = self.cone(p, a);
        let j = (i + 1) % self.n_directions;
        let k = self.n_directions;
        let row0 = &self.values[ix * k..(ix + 1) * k];
        let v0 = alpha * row0[i] + beta * row0[j];
        if w == 0.0 {
            return v0;
        }
        let row1 = &self.values[(ix + 1) * k..(ix + 2) * k];
        let v1 = alpha * row1[i] + beta * row1[j];
        (1.0 - w) * v0 + w * v1
    }

    /// `G̃(x̃, p, A)`; x̃ outside the grid is a coverage error.
    pub fn eval(&self, x: f64, p: f64, a: f64) -> Result<f64> {
        let (ix, w) = self.locate_x(x).ok_or(Error::Coverage { x, p, a })?;
        Ok(self.eval_cell(ix, w, p, a))
    }

    /// Largest gradient in (p, A) of the piecewise-linear interpolant.
    pub fn gradient_bound(&self) -> f64 {
        self.cone_gradients().map(|(gp, ga)| libm::sqrt(gp * gp + ga * ga)).fold(0.0, f64::max)
    }

    /// Largest `|∂_p G̃|` and `|∂_A G̃|` of the interpolant.
    pub fn gradient_bounds(&self) -> (f64, f64) {
        self.cone_gradients().fold((0.0, 0.0), |(bp, ba), (gp, ga)| (bp.max(gp.abs()), ba.max(ga.abs())))
    }

    fn cone_gradients(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let k = self.n_directions;
        (0..self.x_grid.len() * k).map(move |idx| {
            let (ix, i) = (idx / k, idx % k);
            let j = (i + 1) % k;
            let (fi, fj) = (self.stored(ix, i), self.stored(ix, j));
            let det = self.cos[i] * self.sin[j] - self.sin[i] * self.cos[j];
            ((fi * self.sin[j] - fj * self.sin[i]) / det, (self.cos[i] * fj - self.cos[j] * fi) / det)
        })
    }

    /// Values of p where `(p, a)` crosses a stored direction (kinks in p).
    pub fn kinks_in_p(&self, a: f64, out: &mut Vec<f64>) {
        out.clear();
        self.for_each_kink(a, |p| out.push(p));
    }

    #[inline]
    pub(crate) fn for_each_kink(&self, a: f64, mut f: impl FnMut(f64)) {
        if a == 0.0 {
            f(0.0);
            return;
        }
        for k in 0..self.n_directions {
            if self.sin[k] * a > 0.0 {
                f(a * self.cos[k] / self.sin[k]);
            }
        }
    }

    /// Checks the sublinearity properties on stored values.
    pub fn check_properties(&self, trials: usize, seed: u64) -> PropertyReport {
        let k = self.n_directions;
        let tol = 3.0 * self.max_tolerance().max(super::TOLERANCE_FLOOR);
        let mut sub_excess = f64::NEG_INFINITY;
        let mut mono_excess = f64::NEG_INFINITY;
        for ix in 0..self.x_grid.len() {
            for i in 0..k {
                for j in (i + 1)..k {
                    let gap = j - i;
                    let excess = if gap == k / 2 {
                        -(self.stored(ix, i) + self.stored(ix, j))
                    } else if (i + j) % 2 == 0 {
                        let (mid, arc) = if gap < k / 2 { ((i + j) / 2, gap) } else { (((i + j) / 2 + k / 2) % k, k - gap) };
                        let half = PI * arc as f64 / k as f64;
                        2.0 * libm::cos(half) * self.stored(ix, mid) - self.stored(ix, i) - self.stored(ix, j)
                    } else {
                        continue;
                    };
                    sub_excess = sub_excess.max(excess);
                }
            }
            // (p, A) and (p, −A) share p; the one with A > 0 dominates.
            for i in 1..k / 2 {
                let mirror = k - i;
                mono_excess = mono_excess.max(self.stored(ix, mirror) - self.stored(ix, i));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = self.x_range();
        let mut homog: f64 = 0.0;
        for _ in 0..trials {
            let x = rng.random_range(lo..=hi);
            let theta = rng.random_range(0.0..2.0 * PI);
            let r = rng.random_range(0.1..3.0);
            let lambda = rng.random_range(0.0..10.0);
            let (p, a) = (r * libm::cos(theta), r * libm::sin(theta));
            let base = self.eval(x, p, a).unwrap_or(f64::NAN);
            let scaled = self.eval(x, lambda * p, lambda * a).unwrap_or(f64::NAN);
            let rel = (scaled - lambda * base).abs() / (lambda * base).abs().max(1.0);
            homog = homog.max(if rel.is_nan() { f64::INFINITY } else { rel });
        }

        let mut continuity: f64 = 0.0;
        for ix in 0..self.x_grid.len() - 1 {
            let dx = self.x_grid[ix + 1] - self.x_grid[ix];
            for d in 0..k {
                continuity = continuity.max((self.stored(ix + 1, d) - self.stored(ix, d)).abs() / dx);
            }
        }

        PropertyReport {
            tolerance: tol,
            subadditivity_excess: sub_excess,
            monotonicity_excess: mono_excess,
            homogeneity_rel_error: homog,
            continuity_quotient: continuity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyReport {
    /// Three times the largest tolerance estimate (floored at rounding level).
    pub tolerance: f64,
    /// Largest `G̃(u+v) − G̃(u) − G̃(v)` over stored triples.
    pub subadditivity_excess: f64,
    /// Largest `G̃(p, −|A|) − G̃(p, |A|)` over mirrored stored directions.
    pub monotonicity_excess: f64,
    pub homogeneity_rel_error: f64,
    /// Largest difference quotient between adjacent x̃ nodes.
    pub continuity_quotient: f64,
}

impl PropertyReport {
    pub fn subadditive(&self) -> bool {
        self.subadditivity_excess <= self.tolerance
    }

    pub fn monotone(&self) -> bool {
        self.monotonicity_excess <= self.tolerance
    }

    pub fn homogeneous(&self) -> bool {
        self.homogeneity_rel_error <= 1e-12
    }
}

/// Builds a table with default options (fast spacing 0.05, starts {−2, 0, 2}).
pub fn build_table(sys: &TwoScaleSystem, x_grid: &[f64], n_directions: usize, horizon: f64) -> Result<GeneratorTable> {
    build_table_with(sys, x_grid, &TableOptions::new(n_directions, horizon))
}

/// Cesàro samples at every (x̃, direction), a seeded subset cross-checked by
/// the discounted route, and the sample gates.
pub fn build_table_with(sys: &TwoScaleSystem, x_grid: &[f64], opts: &TableOptions) -> Result<GeneratorTable> {
    sys.require_scalar()?;
    let k = opts.n_directions;
    if k < 8 {
        return Err(Error::invalid("n_directions must be at least 8"));
    }
    let eta = sys.eta_claimed;
    let spec = fast_axis_spec(eta, opts.fast_h, &opts.starts, opts.horizon)?;
    let (xlo, xhi) = (x_grid[0], x_grid[x_grid.len() - 1]);
    let audit = audit_hypotheses(
        sys,
        SampleBox { slow: (xlo, xhi), fast: (spec.slow.lo, spec.slow.hi) },
        400,
        opts.seed,
    )?;
    if audit.dissipativity.status == AuditStatus::Fail {
        return Err(Error::Gate("frozen fast problems fail the dissipativity audit".into()));
    }

    let (cos, sin) = directions(k);
    // Fields free of x̃ give the same sample at every node; solve once.
    let x_free = !sys.fields().iter().any(|f| f.uses_slow());
    let solve_x: Vec<f64> = if x_free { vec![xlo] } else { x_grid.to_vec() };
    let n = solve_x.len() * k;
    let solved = par::map_indexed(n, |idx| {
        let (ix, d) = (idx / k, idx % k);
        let fp = FrozenFastProblem::new(sys, solve_x[ix], cos[d], sin[d])?;
        cesaro_lambda(&fp, opts.horizon, &spec, &opts.starts)
    });
    let solved: Vec<GeneratorSample> = solved.into_iter().collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    order.shuffle(&mut rng);
    let count = libm::ceil(opts.cross_check_fraction * n as f64) as usize;
    let mut chosen: Vec<usize> = order.into_iter().take(count.min(n)).collect();
    chosen.sort_unstable();
    let disc = par::map_indexed(chosen.len(), |c| {
        let idx = chosen[c];
        let fp = FrozenFastProblem::new(sys, solve_x[idx / k], cos[idx % k], sin[idx % k])?;
        discounted_lambda(&fp, &opts.alpha_ladder, &spec)
    });
    let mut solved = solved;
    for (c, v) in chosen.iter().zip(disc) {
        solved[*c].lambda_discounted = Some(v?);
    }

    for s in &solved {
        if s.xbar_spread > s.tolerance_estimate {
            return Err(Error::Gate(format!(
                "start spread {:.3e} exceeds tolerance {:.3e} at x = {}, p = {}, A = {}",
                s.xbar_spread, s.tolerance_estimate, s.x_tilde, s.p, s.a
            )));
        }
        if let Some(d) = s.lambda_discounted {
            if (d - s.lambda_cesaro).abs() > 5.0 * s.tolerance_estimate {
                return Err(Error::Gate(format!(
                    "Cesaro {:.6} and discounted {:.6} disagree beyond 5 x {:.3e} at x = {}, p = {}, A = {}",
                    s.lambda_cesaro, d, s.tolerance_estimate, s.x_tilde, s.p, s.a
                )));
            }
        }
    }

    let mut samples = Vec::with_capacity(x_grid.len() * k);
    for (ix, &x) in x_grid.iter().enumerate() {
        let row = if x_free { &solved[..] } else { &solved[ix * k..(ix + 1) * k] };
        for s in row {
            let mut s = s.clone();
            s.x_tilde = x;
            samples.push(s);
        }
    }
    let values = samples.iter().map(|s| s.lambda_cesaro).collect();
    GeneratorTable::from_parts(x_grid.to_vec(), k, values, samples, eta, opts.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heat_table() -> GeneratorTable {
        GeneratorTable::from_fn(vec![-1.0, 0.0, 1.0], 32, |_, p, a| 0.5 * p + if a >= 0.0 { 2.0 * a } else { 0.5 * a })
            .unwrap()
    }

    #[test]
    fn piecewise_linear_generators_are_exact() {
        let t = heat_table();
        for (p, a) in [(0.3, 0.7), (-1.2, 0.1), (2.0, -3.0), (0.0, -1.0), (-0.4, 0.0)] {
            let exact = 0.5 * p + if a >= 0.0 { 2.0 * a } else { 0.5 * a };
            assert!((t.eval(0.3, p, a).unwrap() - exact).abs() < 1e-12);
        }
        assert_eq!(t.eval(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(t.eval(1.5, 1.0, 0.0), Err(Error::Coverage { .. })));
    }

    #[test]
    fn properties_of_sublinear_table() {
        let r = heat_table().check_properties(100, 3);
        assert!(r.subadditive() && r.monotone() && r.homogeneous(), "{r:?}");
        let bad = GeneratorTable::from_fn(vec![0.0, 1.0], 16, |_, _, a| -a).unwrap();
        assert!(!bad.check_properties(10, 1).monotone());
    }

    #[test]
    fn gradient_bound_of_linear_map() {
        let t = GeneratorTable::from_fn(vec![0.0, 1.0], 16, |_, p, a| 3.0 * p + 4.0 * a).unwrap();
        assert!((t.gradient_bound() - 5.0).abs() < 1e-12);
        let (gp, ga) = t.gradient_bounds();
        assert!((gp - 3.0).abs() < 1e-12 && (ga - 4.0).abs() < 1e-12);
    }

    #[test]
    fn kinks_cover_directions() {
        let t = heat_table();
        let mut out = Vec::new();
        t.kinks_in_p(1.0, &mut out);
        assert_eq!(out.len(), 15);
        t.kinks_in_p(0.0, &mut out);
        assert_eq!(out, vec![0.0]);
    }
}
