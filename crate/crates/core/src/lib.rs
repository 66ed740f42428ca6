//! Mass-conservative finite-volume simulation of the radial repulsive
//! chemotaxis-consumption system
//!
//! ```text
//! ∂ₜu = ∇·(D(u)∇u) + ∇·(u∇v),   0 = Δv − uv   in B_R ⊂ ℝⁿ,
//! ν·(D(u)∇u + u∇v) = 0,   v = M   on ∂B_R,
//! ```
//!
//! with `D(ξ) = k_D (1 + ξ)^{m−1}`, instrumented with the mass-accumulation
//! functionals and the pointwise inequalities that govern boundedness and
//! blow-up of radial solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod harness;
pub mod model;
pub mod quadrature;
pub mod stepper;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Field, RadialGrid};

#[cfg(doctest)]
mod doctest;
