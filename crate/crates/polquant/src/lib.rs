//! Polarized deformation quantization on flat symplectic models.
//!
//! The crate implements, over trigonometric-polynomial coefficient rings:
//!
//! - [`trig`] / [`schwartz`] — the coefficient rings: finite Fourier sums on
//!   the torus and Gaussian-times-polynomial profiles on ℝⁿ with exact
//!   derivatives.
//! - [`weyl`] — graded arithmetic in the formal Weyl bundle: the fibrewise
//!   star product with separation of variables, graded commutators, the
//!   polarization-adapted Hodge operators, double-weight grading, the
//!   fibrewise module action and ħ-evaluation.
//! - [`fedosov`] — the flat-model pipeline: the 1-form γ solving the Fedosov
//!   equation, quantum jets, the induced star product, classification of
//!   quantizable functions, classical jets, the level-k action,
//!   Kostant–Souriau operators and the curvature-tower recursion.
//! - [`toeplitz`] — Toeplitz-type operators on polarized distributional
//!   states of the symplectic torus, their asymptotic expansion terms, the
//!   ℓ¹/Schwartz norms and the remainder-decay sweep.
//! - [`config`] / [`report`] / [`run`] — the JSON config schema, CSV/SVG
//!   emission and the command runner backing the thin `polquant` binary.
//!
//! See the runnable programs under `examples/` for one walk-through per
//! capability, and `tests/acceptance.rs` for the quantitative test suite.

pub mod config;
pub mod error;
pub mod fedosov;
pub mod report;
pub mod run;
pub mod schwartz;
pub mod toeplitz;
pub mod trig;
pub mod weyl;

pub use error::{Error, Result};
