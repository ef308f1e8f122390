//! Torsion function of the domain: `-Δ_h Φ = 1` with zero boundary values.
//!
//! The normalized torsion function `Φ / ∫Φ` is the mass-one minimizer of
//! the Dirichlet energy and the long-time limit of unit-mass trajectories;
//! `1 / ∫Φ` is the corresponding energy.

use thiserror::Error;

use crate::grid::{Field, Grid, GridError};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoissonError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("conjugate gradient stalled: residual {residual:e} after {iterations} iterations (tol {tol:e})")]
    NotConverged { iterations: usize, residual: f64, tol: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionSolution {
    pub phi: Field,
    pub torsion_integral: f64,
    pub target_energy: f64,
    /// `max |1 + Δ_h Φ|`.
    pub solver_residual: f64,
    pub iterations: usize,
}

impl TorsionSolution {
    /// The predicted stationary limit `Φ / ∫Φ` (unit mass, zero boundary).
    pub fn stationary_limit(&self) -> Field {
        self.phi.scale(1.0 / self.torsion_integral)
    }
}

/// Solves the torsion problem with the default iteration budget (`10 N`).
pub fn solve_torsion(grid: &Grid, tol: f64) -> Result<TorsionSolution, PoissonError> {
    solve_torsion_with_budget(grid, tol, 10 * grid.len().max(100))
}

pub fn solve_torsion_with_budget(grid: &Grid, tol: f64, max_iter: usize) -> Result<TorsionSolution, PoissonError> {
    if !(tol > 0.0) {
        return Err(PoissonError::BadTolerance(tol));
    }
    let (values, iterations) = match grid.dim() {
        1 => (tridiagonal_torsion(grid), 0),
        _ => conjugate_gradient(grid, tol, max_iter)?,
    };
    let phi = Field::on(grid, values, 0.0)?;
    let residual = residual_max(grid, &phi);
    if grid.dim() > 1 && residual > tol {
        return Err(PoissonError::NotConverged { iterations, residual, tol });
    }
    let torsion_integral = grid.integrate(&phi)?;
    Ok(TorsionSolution {
        phi,
        torsion_integral,
        target_energy: 1.0 / torsion_integral,
        solver_residual: residual,
        iterations,
    })
}

pub fn stationary_limit(ts: &TorsionSolution) -> Field {
    ts.stationary_limit()
}

fn residual_max(grid: &Grid, phi: &Field) -> f64 {
    let mut lap = vec![0.0; grid.len()];
    grid.laplacian_into(phi.values(), 0.0, &mut lap);
    lap.iter().map(|l| (1.0 + l).abs()).fold(0.0, f64::max)
}

/// Thomas elimination for `(-u_{i-1} + 2u_i - u_{i+1}) / h^2 = 1`.
fn tridiagonal_torsion(grid: &Grid) -> Vec<f64> {
    let ax = grid.axes()[0];
    let n = ax.n;
    let h2 = ax.h * ax.h;
    let (a, b, c) = (-1.0, 2.0, -1.0);
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c / b;
    dp[0] = h2 / b;
    for i in 1..n {
        let m = b - a * cp[i - 1];
        cp[i] = c / m;
        dp[i] = (h2 - a * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Unpreconditioned CG on `-Δ_h Φ = 1`, stopped on the max-norm residual.
fn conjugate_gradient(grid: &Grid, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize), PoissonError> {
    let n = grid.len();
    let apply = |x: &[f64], out: &mut [f64]| {
        grid.laplacian_into(x, 0.0, out);
        out.iter_mut().for_each(|v| *v = -*v);
    };
    let mut x = vec![0.0; n];
    let mut r = vec![1.0; n];
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for it in 0..max_iter {
        let rmax = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if rmax <= 0.5 * tol {
            return Ok((x, it));
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rr / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    // The recursive residual can drift from the true one; let the caller
    // judge the true residual.
    let mut lap = vec![0.0; n];
    grid.laplacian_into(&x, 0.0, &mut lap);
    let residual = lap.iter().map(|l| (1.0 + l).abs()).fold(0.0, f64::max);
    if residual <= tol {
        Ok((x, max_iter))
    } else {
        Err(PoissonError::NotConverged { iterations: max_iter, residual, tol })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_torsion_is_exact_quadratic() {
        for n in [3, 10, 99] {
            let g = Grid::interval(0.0, 1.0, n).unwrap();
            let ts = solve_torsion(&g, DEFAULT_TOL).unwrap();
            for (k, v) in ts.phi.values().iter().enumerate() {
                let x = g.point(k)[0];
                assert!((v - x * (1.0 - x) / 2.0).abs() < 1e-13);
            }
            let h = g.axes()[0].h;
            // Trapezoid on the exact quadratic: integral is (1 - h^2) / 12.
            assert!((ts.torsion_integral - (1.0 - h * h) / 12.0).abs() < 1e-14);
            assert!(ts.solver_residual < 1e-10);
            assert!((ts.target_energy * ts.torsion_integral - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn target_energy_on_fine_interval() {
        let g = Grid::interval(0.0, 1.0, 99).unwrap();
        let ts = solve_torsion(&g, DEFAULT_TOL).unwrap();
        assert!((ts.target_energy / 12.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn stationary_limit_on_interval() {
        let g = Grid::interval(0.0, 1.0, 99).unwrap();
        let ts = solve_torsion(&g, DEFAULT_TOL).unwrap();
        let w = ts.stationary_limit();
        assert_eq!(w.boundary_value(), 0.0);
        let mid = w.values()[49];
        assert!((mid - 1.5).abs() < 1e-3, "{mid}");
        assert!((g.integrate(&w).unwrap() - 1.0).abs() < 1e-13);
        let e = g.dirichlet_energy(&w).unwrap();
        assert!((e - 12.0).abs() < 12.0 * 1e-3);
        // Discrete identity: E(w_h) = 1 / ∫Φ_h.
        assert!((e - ts.target_energy).abs() < 1e-9);
    }

    #[test]
    fn rectangle_phi_positive_and_residual_within_tol() {
        let g = Grid::rectangle((0.0, 2.0), (0.0, 1.0), 15, 7).unwrap();
        let ts = solve_torsion(&g, 1e-11).unwrap();
        assert!(ts.solver_residual <= 1e-11);
        assert!(ts.phi.min() > 0.0);
    }

    #[test]
    fn bad_tolerance_and_budget() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), 9, 9).unwrap();
        assert_eq!(solve_torsion(&g, 0.0), Err(PoissonError::BadTolerance(0.0)));
        assert!(matches!(solve_torsion_with_budget(&g, 1e-12, 2), Err(PoissonError::NotConverged { .. })));
    }
}
