//! The monotone sublinear function G on symmetric matrices.
//!
//! G is realized as `G(A) = 1/2 * max_{γ ∈ Γ} tr(γ A)` over a volatility
//! uncertainty set Γ of positive semidefinite matrices.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Eigenvalues below zero but above `-PSD_TOLERANCE` are clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Absolute tolerance used by [`check_axioms`].
pub const AXIOM_TOLERANCE: f64 = 1e-12;

/// A dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMat {
    /// Builds a matrix from row-major entries; symmetry must hold exactly.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::invalid("matrix is not symmetric"));
                }
            }
        }
        Ok(SymMat { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            entries.extend_from_slice(row);
        }
        SymMat::new(dim, entries)
    }

    pub fn scalar(a: f64) -> Self {
        SymMat { dim: 1, entries: vec![a] }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMat { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(d: &[f64]) -> Self {
        let dim = d.len();
        let mut m = Self::zeros(dim);
        for (i, v) in d.iter().enumerate() {
            m.entries[i * dim + i] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `tr(self * other)` for symmetric arguments.
    pub fn trace_product(&self, other: &SymMat) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat { dim: self.dim, entries: self.entries.iter().map(|a| a * s).collect() }
    }

    fn zip(&self, other: &SymMat, f: impl Fn(f64, f64) -> f64) -> SymMat {
        debug_assert_eq!(self.dim, other.dim);
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| f(*a, *b)).collect();
        SymMat { dim: self.dim, entries }
    }

    /// `C Cᵀ` for a square row-major `c`; symmetric by construction.
    pub fn gram(dim: usize, c: &[f64]) -> SymMat {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v: f64 = (0..dim).map(|k| c[i * dim + k] * c[j * dim + k]).sum();
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        SymMat { dim, entries }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Symmetric PSD square root, used to turn a covariance into a noise loading.
    pub fn psd_sqrt(&self) -> SymMat {
        if self.dim == 1 {
            return SymMat::scalar(libm::sqrt(self.entries[0].max(0.0)));
        }
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        let eig = m.symmetric_eigen();
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut v = 0.0;
                for k in 0..d {
                    let s = libm::sqrt(eig.eigenvalues[k].max(0.0));
                    v += eig.eigenvectors[(i, k)] * s * eig.eigenvectors[(j, k)];
                }
                entries[i * d + j] = v;
                entries[j * d + i] = v;
            }
        }
        SymMat { dim: d, entries }
    }

    fn clamp_psd(&self) -> Result<SymMat> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        let eig = m.symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE {
            return Err(Error::invalid("uncertainty set matrix is not positive semidefinite"));
        }
        if min >= 0.0 {
            return Ok(self.clone());
        }
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut v = 0.0;
                for k in 0..d {
                    let l = eig.eigenvalues[k].max(0.0);
                    v += eig.eigenvectors[(i, k)] * l * eig.eigenvectors[(j, k)];
                }
                entries[i * d + j] = v;
                entries[j * d + i] = v;
            }
        }
        Ok(SymMat { dim: d, entries })
    }
}

/// Volatility uncertainty set Γ.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    /// Scalar volatilities `γ ∈ [sigma_lo_sq, sigma_hi_sq]` (dimension 1).
    Interval1D { sigma_lo_sq: f64, sigma_hi_sq: f64 },
    /// Finitely many PSD covariance matrices of a common dimension.
    FiniteSet { matrices: Vec<SymMat> },
}

impl UncertaintySet {
    pub fn interval(sigma_lo_sq: f64, sigma_hi_sq: f64) -> Result<Self> {
        if !(sigma_lo_sq > 0.0 && sigma_lo_sq <= sigma_hi_sq && sigma_hi_sq.is_finite()) {
            return Err(Error::invalid("interval needs 0 < sigma_lo_sq <= sigma_hi_sq < inf"));
        }
        Ok(UncertaintySet::Interval1D { sigma_lo_sq, sigma_hi_sq })
    }

    /// Validates PSD-ness (clamping rounding noise) and a common dimension.
    pub fn finite(matrices: Vec<SymMat>) -> Result<Self> {
        let first = matrices.first().ok_or_else(|| Error::invalid("finite set is empty"))?;
        let dim = first.dim();
        let mut clamped = Vec::with_capacity(matrices.len());
        for m in &matrices {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.dim() });
            }
            clamped.push(m.clamp_psd()?);
        }
        Ok(UncertaintySet::FiniteSet { matrices: clamped })
    }

    pub fn dim(&self) -> usize {
        match self {
            UncertaintySet::Interval1D { .. } => 1,
            UncertaintySet::FiniteSet { matrices } => matrices[0].dim(),
        }
    }

    /// True if `gamma` belongs to the set (interval membership or list membership).
    pub fn contains(&self, gamma: &SymMat) -> bool {
        match self {
            UncertaintySet::Interval1D { sigma_lo_sq, sigma_hi_sq } => {
                gamma.dim() == 1 && gamma.get(0, 0) >= *sigma_lo_sq && gamma.get(0, 0) <= *sigma_hi_sq
            }
            UncertaintySet::FiniteSet { matrices } => matrices.iter().any(|m| m == gamma),
        }
    }
}

/// The sublinear function G with its non-degeneracy bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GFunction {
    dim: usize,
    set: UncertaintySet,
    floor: f64,
    cap: f64,
}

impl GFunction {
    /// Computes floor and cap from the set; floor must be positive.
    pub fn new(set: UncertaintySet) -> Result<Self> {
        let (floor, cap) = match &set {
            UncertaintySet::Interval1D { sigma_lo_sq, sigma_hi_sq } => (*sigma_lo_sq, *sigma_hi_sq),
            UncertaintySet::FiniteSet { matrices } => {
                let mut floor = f64::INFINITY;
                let mut cap = f64::NEG_INFINITY;
                for m in matrices {
                    let ev = m.eigenvalues();
                    floor = floor.min(ev[0]);
                    cap = cap.max(ev[ev.len() - 1]);
                }
                (floor, cap)
            }
        };
        if !(floor > 0.0) {
            return Err(Error::invalid("G is degenerate: smallest eigenvalue over the set must be positive"));
        }
        Ok(GFunction { dim: set.dim(), set, floor, cap })
    }

    pub fn interval(sigma_lo_sq: f64, sigma_hi_sq: f64) -> Result<Self> {
        Self::new(UncertaintySet::interval(sigma_lo_sq, sigma_hi_sq)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&self) -> &UncertaintySet {
        &self.set
    }

    /// Effective lower volatility bound.
    pub fn nondegeneracy_floor(&self) -> f64 {
        self.floor
    }

    /// Effective upper volatility bound.
    pub fn nondegeneracy_cap(&self) -> f64 {
        self.cap
    }

    /// Scalar fast path; valid only for `dim == 1`.
    pub fn scalar_form(&self) -> Result<ScalarG> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: self.dim });
        }
        Ok(ScalarG { half_lo: 0.5 * self.floor, half_hi: 0.5 * self.cap })
    }
}

/// One-dimensional G: `m ↦ (hi·m⁺ − lo·m⁻)/2`. Every scalar uncertainty set
/// reduces to this form with lo, hi the extreme volatilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarG {
    pub half_lo: f64,
    pub half_hi: f64,
}

impl ScalarG {
    #[inline(always)]
    pub fn apply(&self, m: f64) -> f64 {
        if m >= 0.0 {
            self.half_hi * m
        } else {
            self.half_lo * m
        }
    }

    /// The volatility that attains the max for argument `m`.
    #[inline]
    pub fn argmax(&self, m: f64) -> f64 {
        if m >= 0.0 {
            2.0 * self.half_hi
        } else {
            2.0 * self.half_lo
        }
    }
}

/// `G(A) = 1/2 max_{γ ∈ Γ} tr(γA)`.
pub fn eval_g(g: &GFunction, a: &SymMat) -> Result<f64> {
    if a.dim() != g.dim {
        return Err(Error::DimensionMismatch { expected: g.dim, found: a.dim() });
    }
    Ok(match &g.set {
        UncertaintySet::Interval1D { sigma_lo_sq, sigma_hi_sq } => {
            let m = a.get(0, 0);
            (sigma_hi_sq * m.max(0.0) - sigma_lo_sq * (-m).max(0.0)) / 2.0
        }
        UncertaintySet::FiniteSet { matrices } => {
            let best = matrices.iter().map(|m| m.trace_product(a)).fold(f64::NEG_INFINITY, f64::max);
            0.5 * best
        }
    })
}

/// `G([m])` for one-dimensional G.
pub fn scalarize(g: &GFunction, m: f64) -> Result<f64> {
    if g.dim != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: g.dim });
    }
    eval_g(g, &SymMat::scalar(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Monotonicity,
    Subadditivity,
    Homogeneity,
    SandwichLower,
    SandwichUpper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub a: SymMat,
    pub b: SymMat,
    pub lambda: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub trials: usize,
    pub floor: f64,
    pub cap: f64,
    pub zero_is_exact: bool,
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.zero_is_exact && self.violations.is_empty()
    }

    pub fn count(&self, axiom: Axiom) -> usize {
        self.violations.iter().filter(|v| v.axiom == axiom).count()
    }
}

const LAMBDAS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 10.0];

fn random_sym(rng: &mut ChaCha8Rng, dim: usize) -> SymMat {
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            entries[i * dim + j] = v;
            entries[j * dim + i] = v;
        }
    }
    SymMat { dim, entries }
}

fn random_psd(rng: &mut ChaCha8Rng, dim: usize) -> SymMat {
    let c: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    SymMat::gram(dim, &c)
}

/// Samples `trials` pairs `A = B + P` with P PSD and checks the G axioms.
pub fn check_axioms(g: &GFunction, trials: usize, seed: u64) -> Result<AxiomReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let d = g.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let tol = AXIOM_TOLERANCE;
    let mut flag = |axiom, a: &SymMat, b: &SymMat, lambda, excess: f64| {
        if excess > 0.0 {
            violations.push(AxiomViolation { axiom, a: a.clone(), b: b.clone(), lambda, excess });
        }
    };
    for trial in 0..trials {
        let b = random_sym(&mut rng, d);
        let a = b.add(&random_psd(&mut rng, d));
        let ga = eval_g(g, &a)?;
        let gb = eval_g(g, &b)?;
        let tr = a.sub(&b).trace();

        flag(Axiom::Monotonicity, &a, &b, 1.0, gb - ga - tol);
        flag(Axiom::SandwichLower, &a, &b, 1.0, 0.5 * g.floor * tr - (ga - gb) - tol);
        flag(Axiom::SandwichUpper, &a, &b, 1.0, (ga - gb) - 0.5 * g.cap * tr - tol);
        let gab = eval_g(g, &a.add(&b))?;
        flag(Axiom::Subadditivity, &a, &b, 1.0, gab - ga - gb - tol);

        let lambda = if trial < LAMBDAS.len() { LAMBDAS[trial] } else { rng.random_range(0.0..10.0) };
        let gl = eval_g(g, &a.scale(lambda))?;
        let scale = (lambda * ga).abs().max(1.0);
        flag(Axiom::Homogeneity, &a, &b, lambda, (gl - lambda * ga).abs() - tol * scale);
    }
    let zero_is_exact = eval_g(g, &SymMat::zeros(d))? == 0.0;
    Ok(AxiomReport { trials, floor: g.floor, cap: g.cap, zero_is_exact, violations })
}
