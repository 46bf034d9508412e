//! Optimal standard and adversarially robust linear classifiers for binary
//! Gaussian mixtures under ℓ∞ perturbations.
//!
//! The crate computes both optimal classifiers in closed form (the robust one
//! through a box-constrained quadratic program), their exact 0-1 risks, the
//! natural-risk gap between them, how that gap and the risk behave as the
//! class prior moves away from 1/2, and Θ(ε²) bounds on the gap. A separate
//! module treats the linear loss under ℓp weight budgets, including
//! finite-sample concentration bounds, and a Monte Carlo module provides an
//! independent check on every closed form.

pub mod analysis;
pub mod boxqp;
pub mod classifiers;
pub mod cli;
pub mod error;
pub mod linearloss;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod risk;

pub use error::{Error, Result};
pub use model::{GaussianMixture, LinearClassifier, ThreatModel};
pub use numerics::Matrix;
