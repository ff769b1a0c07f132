//! Deterministic particle approximation of the one-dimensional balance law
//!
//! ```text
//! d/dt rho + d/dx [ rho v(rho) (V - dW/dx * rho) ] = f(t, x, rho)
//! ```
//!
//! A density is represented by `N + 1` sorted particles `x_0 < ... < x_N`
//! carrying cell masses `q_1..q_N`; the density on `(x_{i-1}, x_i)` is
//! `q_i / (x_i - x_{i-1})`. Particles move with the free velocity
//! `U = V - dW/dx * rho` modulated by the congestion factor of the cell they
//! move towards, and cell masses change through the source term.
//!
//! Crate layout:
//!
//! - [`scenario`]: model data `(v, V, W, f)` with the growth envelopes, the
//!   built-in catalog and a small expression language for scenario files.
//! - [`density`]: particle states, piecewise-constant reconstruction, CDF,
//!   quantiles, L1 and Wasserstein-1 distances.
//! - [`init`]: equal-mass quantile initialisation from an initial density.
//! - [`dynamics`]: the right-hand side of the particle/mass ODE system.
//! - [`integrator`]: Dormand-Prince 5(4) time stepping with guards.
//! - [`diagnostics`]: a-priori envelopes, bound checks, entropy residuals,
//!   equicontinuity modulus and the structural inequality audit.
//! - [`reference`]: an independent finite-volume solver for cross-checks.
//! - [`cli`]: the commands behind the `pbal` binary.
//!
//! The runnable programs under `examples/` walk through each capability.

// `!(a > b)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod density;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod expr;
pub mod init;
pub mod integrator;
pub mod output;
pub mod quadrature;
pub mod reference;
pub mod scenario;

pub use density::{ParticleSystem, PiecewiseDensity};
pub use error::{Error, Result};
pub use init::{quantile_init, InitialDensity};
pub use integrator::{integrate, SolverConfig, Trajectory};
pub use scenario::{builtin_catalog, Scenario};
