//! Simulation, spectral analysis, and feedback-steering toolkit for a
//! one-dimensional magnetization chain.
//!
//! The state is a unit-vector field m(x, t) on [0, L] evolving by
//!
//!   m_t = m x m_xx - nu m x (m x m_xx) + u(t)
//!
//! with zero-flux boundary conditions, where the spatially uniform input
//! u(t) = k (r - m) + A cos(omega t) e_c combines proportional feedback
//! toward a constant target r with an oscillatory drive. The crate provides
//! the Galerkin spatial discretization on linear splines, an explicit
//! fourth-order time integrator, spectral analysis of the linearization
//! about constant equilibria, Lyapunov-based convergence diagnostics,
//! rate-dependent hysteresis-loop sweeps, and a configuration-driven
//! scenario runner with a command-line interface.

pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod fields;
pub mod hysteresis;
pub mod integrator;
pub mod model;
pub mod scenario;
pub mod spectral;
pub mod verification;

pub use error::{Error, Result};
