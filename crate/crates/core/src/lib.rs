//! Numerical laboratory for explicit convergence rates of monotone SPDEs.
//!
//! The crate covers three stochastic equations on an interval `(0, l)` with
//! Dirichlet boundary conditions: the porous medium equation (`r > 1`), the
//! p-Laplace equation (`p > 2`) and the fast-diffusion equation
//! (`r ∈ (0, 1)`), plus the linear heat equation as an exact
//! Ornstein-Uhlenbeck oracle.
//!
//! * [`rates`] evaluates the closed-form rate constants and the scalar
//!   optimisation that defines the rate `λ`.
//! * [`spectral`] represents fields in the Dirichlet eigenbasis and
//!   evaluates the nonlinear drifts.
//! * [`dynamics`] time-steps the equations, runs synchronous pairs and the
//!   coupling by change of measure with Girsanov bookkeeping.
//! * [`ergodic`] estimates invariant-measure functionals, empirical decay
//!   rates and Lyapunov curves.
//! * [`verify`] checks every explicit inequality at desk scale.
//! * [`cli`] wires the above into batch experiments.

pub mod cli;
pub mod dynamics;
pub mod ergodic;
pub mod error;
pub mod rates;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
