//! Smooth optimization of non-smooth sparse-regularized objectives.
//!
//! Objectives of the form `L(psi, beta) + lambda * R(beta)`, where `R` is an
//! `l_q` or `l_{p,q}` (quasi-)norm penalty, are non-smooth and often
//! non-convex, so plain (S)GD cannot solve them directly. This crate
//! transfers such problems to equivalent *differentiable* surrogates: the
//! coefficient vector `beta` is overparametrized through a Hadamard product
//! or power map `K(xi) = beta`, and the non-smooth penalty is replaced by a
//! weighted squared-`l2` penalty on the factors `xi`. Minimizing the smooth
//! surrogate with ordinary gradient methods recovers exact solutions of the
//! original problem; `beta` is reconstructed as `K(xi_hat)`.
//!
//! The crate is organized around the catalogue of parametrizations in
//! [`param_maps`]:
//!
//! * [`spaces`] — index partitions and the `l_q` / `l_{p,q}` norm calculus.
//! * [`param_maps`] — the parametrization maps, their gradients, the induced
//!   regularizers in closed form, and the balanced solution maps.
//! * [`objectives`] — base and surrogate objectives over linear models and a
//!   small feedforward network.
//! * [`optimizer`] — deterministic seeded heavy-ball (S)GD with schedules,
//!   early stopping, balanced initialization, and post-hoc thresholding.
//! * [`oracle`] — independent non-smooth reference solvers (coordinate
//!   descent, proximal gradient, augmented Lagrangian fiber minimization)
//!   used to verify the transfer numerically.

pub mod linalg;
pub mod objectives;
pub mod optimizer;
pub mod oracle;
pub mod param_maps;
pub mod spaces;

mod error;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
