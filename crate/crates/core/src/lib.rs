//! Numerical q-calculus and the wavelet-aided Kantorovich q-Baskakov operators.
//!
//! The crate is split into three layers:
//!
//! - [`qcalc`]: q-integers, q-factorials, q-binomials, q-Pochhammer products,
//!   the q-derivative and truncated Jackson q-integrals.
//! - [`operators`]: classical Bernstein/Baskakov reference operators, the
//!   q-Baskakov operator and basis, the q-Baskakov–Kantorovich operator and the
//!   wavelet-aided Kantorovich q-Baskakov operator, with closed-form moments.
//! - [`convergence`]: densities and q-statistical limits, weighted norms, the
//!   weighted modulus of smoothness, the Korovkin harness and rate experiments.
//!
//! Everything is `f64`, pure, and free of interior mutability.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod error;
pub mod operators;
pub mod qcalc;

pub use error::{Error, Result};
