//! Numerical averaging for two-time-scale systems driven by G-Brownian motion.
//!
//! The crate is `no_std` with `alloc` when built without the default `std`
//! feature. The `parallel` feature spreads independent work over rayon; every
//! result is bitwise identical to the sequential path.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ergogen;
pub mod error;
pub mod expr;
pub mod fnpde;
pub mod gcore;
mod par;
pub mod scenario;
pub mod system;

pub use error::{Error, Result};
pub use expr::{parse_expr, Expr};
pub use gcore::{check_axioms, eval_g, scalarize, AxiomReport, GFunction, SymMat, UncertaintySet};
pub use system::{audit_hypotheses, CoefficientField, FieldName, HypothesisReport, SampleBox, TwoScaleSystem};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
