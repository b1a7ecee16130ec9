//! Solver and verification suite for two-dimensional moist convection in a
//! periodic channel.
//!
//! The model couples velocity, temperature, humidity and pressure on
//! Ω = (0, 2π) × (0, 1) with periodic sidewalls and no-slip, fixed-value
//! top/bottom walls. Temperature and humidity feed back on the vertical
//! momentum balance through linear buoyancy, rotation and turbulent friction
//! enter through a constant 2×2 coupling matrix, and incompressibility is
//! enforced by a pressure projection.
//!
//! Crate layout:
//!
//! * [`params`] — dimensional constants and the dimensionless groups derived
//!   from them (Pr, Le, R, R̃, σ′, ω).
//! * [`fields`] — grid, scalar fields, boundary handling and quadratures.
//! * [`operators`] — discrete gradient/divergence/Laplacian and the
//!   skew-symmetric advection operator.
//! * [`pressure`] — pressure Poisson solver and velocity projection.
//! * [`stepper`] — IMEX time integration (AB2 + Crank–Nicolson by default).
//! * [`mms`] — manufactured-solution convergence harness.
//! * [`diagnostics`] — energy budgets, growth/Hölder probes and weak-form
//!   residuals along trajectories.
//! * [`config`], [`output`], [`runner`] — run configuration, CSV/manifest
//!   persistence and the end-to-end driver used by the `atmocirc` binary.

pub mod config;
pub mod diagnostics;
pub mod fields;
mod fft;
pub mod mms;
pub mod operators;
pub mod output;
pub mod params;
pub mod pressure;
pub mod runner;
pub mod stepper;

pub use fields::{Grid, ScalarField, State};
pub use params::{DimensionlessParams, PhysicalParams};
