//! Numerical harmonic analysis for the Bessel operator
//! `Δ_λ = -d²/dx² - (2λ/x) d/dx` on the half line with measure `x^{2λ} dx`.
//!
//! The crate evaluates the heat, Poisson, conjugate Poisson, Riesz and
//! fractional kernels, applies them to sampled functions, estimates the
//! Lipschitz / BMO / Besov / Triebel–Lizorkin type seminorms, and runs
//! suites that fit the implied constants of the standard kernel and
//! commutator estimates.

pub mod error;
pub mod function_spaces;
pub mod kernels;
pub mod measure_space;
pub mod operators;
pub mod quadrature;
pub mod special_functions;
pub mod verify;

pub use error::{Error, Result};
