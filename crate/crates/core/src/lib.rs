//! Finite-difference laboratory for the degenerate nonlocal parabolic problem
//!
//! ```text
//! u_t = u Δu + u ∫_Ω |∇u|²,   u = 0 on ∂Ω,
//! ```
//!
//! approximated through its ε-regularization (boundary value ε, nonlocal
//! rate capped at 1/ε), together with the mass-constrained Dirichlet-energy
//! minimization whose solution `Φ/∫Φ` is the long-time limit of unit-mass
//! solutions. `Φ` is the torsion function, `-ΔΦ = 1` with zero boundary data.
//!
//! Module map:
//! - [`grid`]: uniform grids, quadrature, Laplacian, Dirichlet energy.
//! - [`poisson`]: torsion function and the predicted limit.
//! - [`initdata`]: initial profiles and their ε-regularization.
//! - [`evolution`]: explicit time stepping and regime detection.
//! - [`variational`]: mass-preserving gradient flow for the energy minimum.
//! - [`diagnostics`]: post-hoc checks on recorded time series.
//! - [`cli`]: configuration, orchestration and file formats.

// `!(x > 0.0)` is used throughout to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod evolution;
pub mod grid;
pub mod initdata;
pub mod poisson;
pub mod variational;

pub use evolution::{Regime, SimConfig, SimState, TimeSeriesRecord};
pub use grid::{Field, Grid};
pub use poisson::{solve_torsion, TorsionSolution};
