//! Two-scale systems assembled from coefficient expressions, plus the
//! sampling audit of the Lipschitz, dissipativity and growth hypotheses.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::gcore::{eval_g, GFunction, SymMat};

/// Absolute slack allowed before an audit sample counts as a violation.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldName {
    BTilde,
    BBar,
    HTilde,
    HBar,
    SigmaTilde,
    SigmaBar,
}

impl FieldName {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldName::BTilde => "b_tilde",
            FieldName::BBar => "b_bar",
            FieldName::HTilde => "h_tilde",
            FieldName::HBar => "h_bar",
            FieldName::SigmaTilde => "sigma_tilde",
            FieldName::SigmaBar => "sigma_bar",
        }
    }
}

/// A matrix of expressions stored row-major.
///
/// Drifts are `n × 1`, diffusions `n × d`. The h fields hold `d·d` rows
/// (pair `(i, j)` at row `i·d + j`) of `n` components each.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub name: FieldName,
    pub rows: usize,
    pub cols: usize,
    pub components: Vec<Expr>,
}

impl CoefficientField {
    pub fn new(name: FieldName, rows: usize, cols: usize, components: Vec<Expr>) -> Result<Self> {
        if components.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: components.len() });
        }
        Ok(CoefficientField { name, rows, cols, components })
    }

    pub fn zeros(name: FieldName, rows: usize, cols: usize) -> Self {
        CoefficientField { name, rows, cols, components: vec![Expr::Const(0.0); rows * cols] }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero_literal)
    }

    pub fn uses_slow(&self) -> bool {
        self.components.iter().any(Expr::uses_slow)
    }

    pub fn uses_fast(&self) -> bool {
        self.components.iter().any(Expr::uses_fast)
    }

    /// Evaluates every component; a non-finite value is an error naming it.
    pub fn eval(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.components.len());
        self.eval_into(xs, ys, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, xs: &[f64], ys: &[f64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        for (k, e) in self.components.iter().enumerate() {
            let v = e.eval(xs, ys);
            if !v.is_finite() {
                return Err(Error::NonFiniteField {
                    component: format!("{}[{}]", self.name.as_str(), k),
                    x_slow: xs.first().copied().unwrap_or(0.0),
                    x_fast: ys.first().copied().unwrap_or(0.0),
                });
            }
            out.push(v);
        }
        Ok(())
    }

    /// Scalar view for the 1-D solvers.
    pub fn eval1(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.components[0].eval(&[x], &[y]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteField { component: format!("{}[0]", self.name.as_str()), x_slow: x, x_fast: y })
        }
    }
}

/// Evaluates a field; the free-function form of [`CoefficientField::eval`].
pub fn eval_field(f: &CoefficientField, x_slow: &[f64], x_fast: &[f64]) -> Result<Vec<f64>> {
    f.eval(x_slow, x_fast)
}

/// Textual description of a system, as found in config files.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSource {
    pub n_slow: usize,
    pub n_fast: usize,
    pub d_bm: usize,
    pub b_tilde: Vec<String>,
    pub b_bar: Vec<String>,
    /// `d·d·n` entries; empty means zero.
    pub h_tilde: Vec<String>,
    pub h_bar: Vec<String>,
    pub sigma_tilde: Vec<String>,
    pub sigma_bar: Vec<String>,
    pub phi: String,
    pub epsilon: f64,
    pub eta: f64,
    pub lip: f64,
    pub growth: f64,
}

impl SystemSource {
    /// One slow, one fast, one Brownian dimension, zero h fields.
    pub fn scalar(b_tilde: &str, b_bar: &str, sigma_tilde: &str, sigma_bar: &str, phi: &str) -> Self {
        SystemSource {
            n_slow: 1,
            n_fast: 1,
            d_bm: 1,
            b_tilde: vec![b_tilde.into()],
            b_bar: vec![b_bar.into()],
            h_tilde: Vec::new(),
            h_bar: Vec::new(),
            sigma_tilde: vec![sigma_tilde.into()],
            sigma_bar: vec![sigma_bar.into()],
            phi: phi.into(),
            epsilon: 0.1,
            eta: 1.0,
            lip: 1.0,
            growth: 1.0,
        }
    }

    pub fn epsilon(mut self, e: f64) -> Self {
        self.epsilon = e;
        self
    }

    pub fn constants(mut self, eta: f64, lip: f64, growth: f64) -> Self {
        self.eta = eta;
        self.lip = lip;
        self.growth = growth;
        self
    }

    pub fn h(mut self, h_tilde: &str, h_bar: &str) -> Self {
        self.h_tilde = vec![h_tilde.into()];
        self.h_bar = vec![h_bar.into()];
        self
    }

    pub fn build(&self, g: GFunction) -> Result<TwoScaleSystem> {
        TwoScaleSystem::from_source(self, g)
    }
}

/// The coefficients of the two-scale system together with ε, φ and the
/// claimed constants η (dissipativity), L₁ (Lipschitz) and L₂ (growth).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleSystem {
    pub n_slow: usize,
    pub n_fast: usize,
    pub d_bm: usize,
    pub g: GFunction,
    pub b_tilde: CoefficientField,
    pub b_bar: CoefficientField,
    pub h_tilde: CoefficientField,
    pub h_bar: CoefficientField,
    pub sigma_tilde: CoefficientField,
    pub sigma_bar: CoefficientField,
    pub epsilon: f64,
    pub phi: Expr,
    pub eta_claimed: f64,
    pub lip_claimed: f64,
    pub growth_claimed: f64,
}

fn parse_field(name: FieldName, rows: usize, cols: usize, src: &[String], n: usize) -> Result<CoefficientField> {
    if src.is_empty() && matches!(name, FieldName::HTilde | FieldName::HBar) {
        return Ok(CoefficientField::zeros(name, rows, cols));
    }
    let comps = src.iter().map(|s| parse_expr(s, n, n)).collect::<Result<Vec<_>>>()?;
    CoefficientField::new(name, rows, cols, comps)
}

impl TwoScaleSystem {
    pub fn from_source(src: &SystemSource, g: GFunction) -> Result<Self> {
        let (n, m, d) = (src.n_slow, src.n_fast, src.d_bm);
        if n == 0 || d == 0 || m != n {
            return Err(Error::invalid("dimensions must be positive with n_fast == n_slow"));
        }
        if g.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: g.dim() });
        }
        let sys = TwoScaleSystem {
            n_slow: n,
            n_fast: m,
            d_bm: d,
            g,
            b_tilde: parse_field(FieldName::BTilde, n, 1, &src.b_tilde, n)?,
            b_bar: parse_field(FieldName::BBar, m, 1, &src.b_bar, n)?,
            h_tilde: parse_field(FieldName::HTilde, d * d, n, &src.h_tilde, n)?,
            h_bar: parse_field(FieldName::HBar, d * d, m, &src.h_bar, n)?,
            sigma_tilde: parse_field(FieldName::SigmaTilde, n, d, &src.sigma_tilde, n)?,
            sigma_bar: parse_field(FieldName::SigmaBar, m, d, &src.sigma_bar, n)?,
            epsilon: src.epsilon,
            phi: parse_expr(&src.phi, n, 0)?,
            eta_claimed: src.eta,
            lip_claimed: src.lip,
            growth_claimed: src.growth,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        for c in [self.eta_claimed, self.lip_claimed, self.growth_claimed] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid("claimed constants must be positive and finite"));
            }
        }
        let d = self.d_bm;
        for h in [&self.h_tilde, &self.h_bar] {
            for i in 0..d {
                for j in 0..i {
                    let cols = h.cols;
                    let a = &h.components[(i * d + j) * cols..(i * d + j + 1) * cols];
                    let b = &h.components[(j * d + i) * cols..(j * d + i + 1) * cols];
                    if a != b {
                        return Err(Error::invalid(format!("{} must be symmetric in (i, j)", h.name.as_str())));
                    }
                }
            }
        }
        for f in self.fields() {
            if !f.components.iter().all(|e| e.fits(self.n_slow, self.n_fast)) {
                return Err(Error::invalid(format!("{} references an undeclared variable", f.name.as_str())));
            }
        }
        if self.phi.uses_fast() || !self.phi.fits(self.n_slow, 0) {
            return Err(Error::invalid("phi may only depend on slow variables"));
        }
        Ok(())
    }

    pub fn fields(&self) -> [&CoefficientField; 6] {
        [&self.b_tilde, &self.b_bar, &self.h_tilde, &self.h_bar, &self.sigma_tilde, &self.sigma_bar]
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut s = self.clone();
        s.epsilon = epsilon;
        s.validate()?;
        Ok(s)
    }

    pub fn with_phi(&self, phi: Expr) -> Result<Self> {
        let mut s = self.clone();
        s.phi = phi;
        s.validate()?;
        Ok(s)
    }

    pub fn is_scalar(&self) -> bool {
        self.n_slow == 1 && self.n_fast == 1 && self.d_bm == 1
    }

    /// Grid solvers are limited to one slow, one fast and one noise dimension.
    pub fn require_scalar(&self) -> Result<()> {
        if self.is_scalar() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "grid solvers need n_slow = n_fast = d_bm = 1, got ({}, {}, {})",
                self.n_slow, self.n_fast, self.d_bm
            )))
        }
    }

    /// All six coefficients at a point of a scalar system.
    pub fn coeffs1(&self, x: f64, y: f64) -> Result<Coeffs1> {
        Ok(Coeffs1 {
            b_tilde: self.b_tilde.eval1(x, y)?,
            b_bar: self.b_bar.eval1(x, y)?,
            h_tilde: self.h_tilde.eval1(x, y)?,
            h_bar: self.h_bar.eval1(x, y)?,
            sigma_tilde: self.sigma_tilde.eval1(x, y)?,
            sigma_bar: self.sigma_bar.eval1(x, y)?,
        })
    }

    /// True if no fast coefficient depends on the slow variable.
    pub fn fast_decoupled(&self) -> bool {
        !self.b_bar.uses_slow() && !self.h_bar.uses_slow() && !self.sigma_bar.uses_slow()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs1 {
    pub b_tilde: f64,
    pub b_bar: f64,
    pub h_tilde: f64,
    pub h_bar: f64,
    pub sigma_tilde: f64,
    pub sigma_bar: f64,
}

/// Sampling region: every slow coordinate in `slow`, every fast one in `fast`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub slow: (f64, f64),
    pub fast: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditStatus {
    Pass,
    Fail,
    /// No sample came within 10% of the claimed constant.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    pub field: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub status: AuditStatus,
    /// Largest observed `lhs - rhs`; positive beyond tolerance means failure.
    pub worst_excess: f64,
    pub witness: Option<Witness>,
}

impl HypothesisCheck {
    pub fn passes(&self) -> bool {
        self.status != AuditStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub lipschitz: HypothesisCheck,
    pub dissipativity: HypothesisCheck,
    pub growth: HypothesisCheck,
    /// `|ℓ(x̃, 0)| ≤ L₁(1 + |x̃|)` for the fast fields.
    pub fast_growth: HypothesisCheck,
    pub measured_lip: f64,
    /// Smallest observed `-lhs/|Δx̄|²` of the dissipativity expression.
    pub measured_eta: f64,
    pub measured_growth: f64,
    /// Largest observed difference quotient of b̄ in x̄.
    pub fast_drift_lip: f64,
}

impl HypothesisReport {
    pub fn passes(&self) -> bool {
        self.lipschitz.passes() && self.dissipativity.passes() && self.growth.passes() && self.fast_growth.passes()
    }
}

struct Tracker {
    worst: f64,
    bound_hit: bool,
    witness: Option<Witness>,
}

impl Tracker {
    fn new() -> Self {
        Tracker { worst: f64::NEG_INFINITY, bound_hit: false, witness: None }
    }

    /// Records one sample `lhs ≤ rhs`; `near` marks samples within 10% of binding.
    fn record(&mut self, lhs: f64, rhs: f64, near: bool, w: impl FnOnce() -> Witness) {
        let excess = lhs - rhs;
        self.bound_hit |= near;
        if excess > self.worst {
            self.worst = excess;
            self.witness = Some(w());
        }
    }

    fn finish(self) -> HypothesisCheck {
        let status = if self.worst > AUDIT_TOLERANCE {
            AuditStatus::Fail
        } else if self.bound_hit {
            AuditStatus::Pass
        } else {
            AuditStatus::Inconclusive
        };
        let witness = if status == AuditStatus::Fail { self.witness } else { None };
        HypothesisCheck { status, worst_excess: self.worst, witness }
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|a| a * a).sum())
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn sample(rng: &mut ChaCha8Rng, n: usize, range: (f64, f64)) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(range.0..=range.1)).collect()
}

fn perturb(rng: &mut ChaCha8Rng, v: &[f64], radius: f64, range: (f64, f64)) -> Vec<f64> {
    v.iter().map(|a| (a + rng.random_range(-radius..=radius)).clamp(range.0, range.1)).collect()
}

/// Monte-Carlo audit of (H1)–(H3) on `bx`. Deterministic given `seed`.
pub fn audit_hypotheses(sys: &TwoScaleSystem, bx: SampleBox, trials: usize, seed: u64) -> Result<HypothesisReport> {
    if trials < 100 {
        return Err(Error::invalid("audit needs at least 100 trials"));
    }
    if !(bx.slow.0 <= bx.slow.1 && bx.fast.0 <= bx.fast.1)
        || ![bx.slow.0, bx.slow.1, bx.fast.0, bx.fast.1].iter().all(|v| v.is_finite())
    {
        return Err(Error::invalid("audit box must be bounded and ordered"));
    }
    let (n, d) = (sys.n_slow, sys.d_bm);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius_s = 1e-3 * (bx.slow.1 - bx.slow.0).max(1e-6);
    let radius_f = 1e-3 * (bx.fast.1 - bx.fast.0).max(1e-6);
    let l1 = sys.lip_claimed;
    let l2 = sys.growth_claimed;
    let eta = sys.eta_claimed;

    let mut h1 = Tracker::new();
    let mut h2 = Tracker::new();
    let mut h3 = Tracker::new();
    let mut hf = Tracker::new();
    let mut measured_lip: f64 = 0.0;
    let mut measured_eta = f64::INFINITY;
    let mut measured_growth: f64 = 0.0;
    let mut fast_drift_lip: f64 = 0.0;

    for t in 0..trials {
        let near = t % 2 == 0;
        let xs = sample(&mut rng, n, bx.slow);
        let ys = sample(&mut rng, n, bx.fast);
        let (xs2, ys2) = if near {
            (perturb(&mut rng, &xs, radius_s, bx.slow), perturb(&mut rng, &ys, radius_f, bx.fast))
        } else {
            (sample(&mut rng, n, bx.slow), sample(&mut rng, n, bx.fast))
        };
        let (ds_, df_) = (diff_norm(&xs, &xs2), diff_norm(&ys, &ys2));
        let dist = libm::sqrt(ds_ * ds_ + df_ * df_);
        let point = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<f64>>();

        // (H1)
        if dist > 0.0 {
            for f in sys.fields() {
                let va = f.eval(&xs, &ys)?;
                let vb = f.eval(&xs2, &ys2)?;
                let lhs = diff_norm(&va, &vb);
                measured_lip = measured_lip.max(lhs / dist);
                let rhs = l1 * dist * (1.0 + AUDIT_TOLERANCE);
                h1.record(lhs, rhs, lhs >= 0.9 * l1 * dist, || Witness {
                    x: point(&xs, &ys),
                    x_prime: point(&xs2, &ys2),
                    field: f.name.as_str(),
                });
            }
        }

        // (H2): same slow argument, two fast arguments.
        let dy: Vec<f64> = ys.iter().zip(&ys2).map(|(a, b)| a - b).collect();
        let dy2: f64 = dy.iter().map(|a| a * a).sum();
        if dy2 > 0.0 {
            let sa = sys.sigma_bar.eval(&xs, &ys)?;
            let sb = sys.sigma_bar.eval(&xs, &ys2)?;
            let ha = sys.h_bar.eval(&xs, &ys)?;
            let hb = sys.h_bar.eval(&xs, &ys2)?;
            let ba = sys.b_bar.eval(&xs, &ys)?;
            let bb = sys.b_bar.eval(&xs, &ys2)?;
            let ds: Vec<f64> = sa.iter().zip(&sb).map(|(a, b)| a - b).collect();
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    let q: f64 = (0..n).map(|k| ds[k * d + i] * ds[k * d + j]).sum();
                    let hij: f64 = (0..n).map(|k| dy[k] * (ha[(i * d + j) * n + k] - hb[(i * d + j) * n + k])).sum();
                    m[i * d + j] = q + 2.0 * hij;
                }
            }
            for i in 0..d {
                for j in 0..i {
                    let s = 0.5 * (m[i * d + j] + m[j * d + i]);
                    m[i * d + j] = s;
                    m[j * d + i] = s;
                }
            }
            let gm = eval_g(&sys.g, &SymMat::new(d, m)?)?;
            let drift: f64 = dy.iter().enumerate().map(|(k, v)| v * (ba[k] - bb[k])).sum();
            let lhs = gm + drift;
            let rhs = -eta * dy2;
            measured_eta = measured_eta.min(-lhs / dy2);
            let bl = diff_norm(&ba, &bb) / libm::sqrt(dy2);
            fast_drift_lip = fast_drift_lip.max(bl);
            h2.record(lhs, rhs + AUDIT_TOLERANCE, rhs - lhs <= 0.1 * eta * dy2, || Witness {
                x: point(&xs, &ys),
                x_prime: point(&xs, &ys2),
                field: "b_bar/h_bar/sigma_bar",
            });
        }

        // (H3) on the slow fields, and the derived fast-field bound at x̄ = 0.
        let scale = 1.0 + norm(&xs);
        for f in [&sys.b_tilde, &sys.h_tilde, &sys.sigma_tilde] {
            let lhs = norm(&f.eval(&xs, &ys)?);
            measured_growth = measured_growth.max(lhs / scale);
            h3.record(lhs, l2 * scale + AUDIT_TOLERANCE, lhs >= 0.9 * l2 * scale, || Witness {
                x: point(&xs, &ys),
                x_prime: point(&xs, &ys),
                field: f.name.as_str(),
            });
        }
        let zero = vec![0.0; n];
        for f in [&sys.b_bar, &sys.h_bar, &sys.sigma_bar] {
            let lhs = norm(&f.eval(&xs, &zero)?);
            hf.record(lhs, l1 * scale + AUDIT_TOLERANCE, lhs >= 0.9 * l1 * scale, || Witness {
                x: point(&xs, &zero),
                x_prime: point(&xs, &zero),
                field: f.name.as_str(),
            });
        }
    }

    Ok(HypothesisReport {
        lipschitz: h1.finish(),
        dissipativity: h2.finish(),
        growth: h3.finish(),
        fast_growth: hf.finish(),
        measured_lip,
        measured_eta,
        measured_growth,
        fast_drift_lip,
    })
}
