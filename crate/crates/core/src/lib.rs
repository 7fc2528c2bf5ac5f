//! Numerical verification chain for the Landau-Zener survival probability:
//! unitary propagation of the linear-sweep models, the zero-curvature
//! structure of the τ-deformed three-level model, the functional equation
//! p(2γ) = p(γ)² and its exact Taylor solution, and the first-order
//! perturbative coefficient.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail domain checks

pub mod error;
pub mod flatland;
pub mod functional;
pub mod linalg;
pub mod models;
pub mod propagator;

pub use error::{Error, Result};
pub use models::{HamiltonianFamily, ModelParams};
