//! Hoeffding-type concentration bounds for time averages of uniformly
//! ergodic one-dimensional diffusions.
//!
//! The crate evaluates the tail bound
//!
//! ```text
//! P_x( (1/t)∫₀ᵗ f(X_s)ds − π(f) ≥ ε ) ≤ exp{ −2(tε − 2‖f‖‖Q♯‖)² / ((t+1)‖f‖²(2‖Q♯‖+1)²) }
//! ```
//!
//! together with every constant it needs (scale and speed densities, the
//! stationary law, the average hitting time through the eigentime identity,
//! the deviation-kernel norm surrogate `2 t_av`) and an Euler–Maruyama Monte
//! Carlo harness that checks the bound empirically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod ergodicity;
pub mod error;
pub mod expr;
pub mod mc;
pub mod models;
pub mod poisson;
pub mod quad;
pub mod sum;

pub use error::{Error, Result};
pub use models::{Boundary, ClosedForm, DiffusionSpec, Observable, StateInterval};
