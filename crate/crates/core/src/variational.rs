//! Minimization of the Dirichlet energy over unit-mass fields with zero
//! boundary values.
//!
//! The flow `v ← v + τ (2 Δ_h v + λ)` descends `J(v) = E_h(v)`; the constant
//! multiplier `λ = -2 mean(Δ_h v)` makes every update mass neutral. At a
//! fixed point `-2 Δ_h v = λ`, i.e. `v` is a multiple of the discrete torsion
//! function, which the oracle fields compare against.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{Field, Grid, GridError};
use crate::poisson::{solve_torsion, PoissonError};

/// Allowed deviation of `∫v` from 1 on entry.
pub const MASS_TOL: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default step as a fraction of [`stability_bound`].
pub const DEFAULT_STEP_FRACTION: f64 = 0.9;

const TRACE_EVERY: usize = 1000;
const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimizeError {
    #[error("mass constraint violated: ∫v = {mass} (tolerance {tol:e})")]
    MassConstraint { mass: f64, tol: f64 },
    #[error("boundary value must be 0, got {0}")]
    NonZeroBoundary(f64),
    #[error("step must be positive, got {0}")]
    BadStep(f64),
    #[error("energy increased from {before} to {after} at iteration {iteration}; step exceeds the stability bound {bound:e}?")]
    Divergence { iteration: usize, before: f64, after: f64, bound: f64 },
    #[error("KKT residual {kkt_residual:e} above tolerance {tol:e} after {iterations} iterations")]
    MaxIterations { iterations: usize, kkt_residual: f64, tol: f64 },
    #[error(transparent)]
    Oracle(#[from] PoissonError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub minimizer: Field,
    pub value: f64,
    pub iterations: usize,
    /// `max |-2 Δ_h v - λ|`.
    pub kkt_residual: f64,
    pub multiplier: f64,
    pub trace: Vec<TracePoint>,
    /// `|J(v) - 1/∫Φ_h|`.
    pub oracle_value_gap: f64,
    /// Discrete H¹ distance between the minimizer and `Φ_h/∫Φ_h`.
    pub oracle_h1_gap: f64,
}

/// Largest step for which the flow is non-expansive: `h_min² / (4 dim)`.
pub fn stability_bound(grid: &Grid) -> f64 {
    let h = grid.h_min();
    h * h / (4.0 * grid.dim() as f64)
}

fn check_member(v: &Field, grid: &Grid) -> Result<(), MinimizeError> {
    if v.boundary_value() != 0.0 {
        return Err(MinimizeError::NonZeroBoundary(v.boundary_value()));
    }
    let mass = grid.integrate(v)?;
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(MinimizeError::MassConstraint { mass, tol: MASS_TOL });
    }
    Ok(())
}

/// `J(v)` for a unit-mass field with zero boundary values.
pub fn energy_of_member(v: &Field, grid: &Grid) -> Result<f64, MinimizeError> {
    check_member(v, grid)?;
    Ok(grid.dirichlet_energy(v)?)
}

pub fn minimize_dirichlet(
    grid: &Grid,
    init: &Field,
    step: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MinimizeResult, MinimizeError> {
    check_member(init, grid)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(MinimizeError::BadStep(step));
    }
    let n = grid.len();
    let bound = stability_bound(grid);
    let mut v = init.values().to_vec();
    let mut lap = vec![0.0; n];
    let mut value = grid.energy_raw(&v, 0.0);
    let mut trace = Vec::new();
    let mut iterations = 0;

    let (kkt_residual, multiplier) = loop {
        grid.laplacian_into(&v, 0.0, &mut lap);
        let lambda = -2.0 * lap.iter().sum::<f64>() / n as f64;
        let kkt = lap.iter().map(|l| (-2.0 * l - lambda).abs()).fold(0.0, f64::max);
        if iterations % TRACE_EVERY == 0 {
            trace.push(TracePoint { iteration: iterations, value, kkt_residual: kkt });
        }
        if kkt <= tol {
            break (kkt, lambda);
        }
        if iterations >= max_iter {
            return Err(MinimizeError::MaxIterations { iterations, kkt_residual: kkt, tol });
        }
        for (x, l) in v.iter_mut().zip(&lap) {
            *x += step * (2.0 * l + lambda);
        }
        iterations += 1;
        let next = grid.energy_raw(&v, 0.0);
        if !next.is_finite() || next > value * (1.0 + 1e-12) + 1e-300 {
            return Err(MinimizeError::Divergence { iteration: iterations, before: value, after: next, bound });
        }
        value = next;
    };
    if trace.last().map(|p| p.iteration) != Some(iterations) {
        trace.push(TracePoint { iteration: iterations, value, kkt_residual });
    }

    let minimizer = Field::on(grid, v, 0.0)?;
    let ts = solve_torsion(grid, ORACLE_TOL)?;
    let oracle_value_gap = (value - ts.target_energy).abs();
    let oracle_h1_gap = grid.h1_distance(&minimizer, &ts.stationary_limit())?;
    Ok(MinimizeResult {
        minimizer,
        value,
        iterations,
        kkt_residual,
        multiplier,
        trace,
        oracle_value_gap,
        oracle_h1_gap,
    })
}

/// One update of the flow, returned as a new field.
pub fn mass_neutral_step(grid: &Grid, v: &Field, step: f64) -> Result<Field, MinimizeError> {
    let lap = grid.laplacian(v)?;
    let lambda = -2.0 * lap.values().iter().sum::<f64>() / grid.len() as f64;
    let values = v.values().iter().zip(lap.values()).map(|(x, l)| x + step * (2.0 * l + lambda)).collect();
    Ok(Field::on(grid, values, v.boundary_value())?)
}

/// The unit-mass constant field with zero boundary values.
pub fn uniform_member(grid: &Grid) -> Field {
    let c = 1.0 / (grid.cell_volume() * grid.len() as f64);
    Field::from_parts_unchecked(vec![c; grid.len()], 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initdata::{make_initial, ProfileSpec};
    use crate::poisson::DEFAULT_TOL as TORSION_TOL;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::interval(0.0, 1.0, n).unwrap()
    }

    fn default_step(g: &Grid) -> f64 {
        DEFAULT_STEP_FRACTION * stability_bound(g)
    }

    #[test]
    fn stationary_init_is_fixed_point() {
        let g = unit(99);
        let w = solve_torsion(&g, TORSION_TOL).unwrap().stationary_limit();
        let res = minimize_dirichlet(&g, &w, default_step(&g), 1e-8, 10).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.kkt_residual < 1e-8);
        assert!((res.value - 12.0).abs() < 0.01);
    }

    #[test]
    fn uniform_init_reaches_oracle() {
        let g = unit(99);
        let res = minimize_dirichlet(&g, &uniform_member(&g), default_step(&g), DEFAULT_TOL, 1_000_000).unwrap();
        assert!(res.oracle_value_gap <= 1e-8, "{}", res.oracle_value_gap);
        assert!(res.oracle_h1_gap <= 1e-6, "{}", res.oracle_h1_gap);
        assert!((g.integrate(&res.minimizer).unwrap() - 1.0).abs() < 1e-12);
        // The multiplier equals 2 J at optimum.
        assert!((res.multiplier - 2.0 * res.value).abs() < 1e-6);
        assert!(res.trace.windows(2).all(|w| w[1].value <= w[0].value * (1.0 + 1e-12)));
    }

    #[test]
    fn unique_minimizer_from_two_inits() {
        let g = unit(99);
        let phi = solve_torsion(&g, TORSION_TOL).unwrap().phi;
        let (sine, _) = make_initial(&ProfileSpec::SineBump { target_mass: 1.0 }, &g, &phi).unwrap();
        let a = minimize_dirichlet(&g, &uniform_member(&g), default_step(&g), DEFAULT_TOL, 1_000_000).unwrap();
        let b = minimize_dirichlet(&g, &sine, default_step(&g), DEFAULT_TOL, 1_000_000).unwrap();
        assert!(a.minimizer.max_abs_diff(&b.minimizer) <= 1e-8);
    }

    #[test]
    fn oversized_step_diverges() {
        let g = unit(49);
        let step = 1.5 * stability_bound(&g);
        assert!(matches!(
            minimize_dirichlet(&g, &uniform_member(&g), step, DEFAULT_TOL, 100_000),
            Err(MinimizeError::Divergence { .. })
        ));
    }

    #[test]
    fn iteration_budget_exhausted() {
        let g = unit(49);
        assert!(matches!(
            minimize_dirichlet(&g, &uniform_member(&g), default_step(&g), DEFAULT_TOL, 5),
            Err(MinimizeError::MaxIterations { iterations: 5, .. })
        ));
    }

    #[test]
    fn rectangle_minimizer_matches_torsion() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), 15, 15).unwrap();
        let res = minimize_dirichlet(&g, &uniform_member(&g), default_step(&g), 1e-9, 1_000_000).unwrap();
        assert!(res.oracle_value_gap < 1e-8);
        assert!(res.oracle_h1_gap < 1e-6);
    }

    #[test]
    fn member_energy_examples() {
        let g = unit(199);
        let h = g.axes()[0].h;
        let ts = solve_torsion(&g, TORSION_TOL).unwrap();
        let w = ts.stationary_limit();
        assert!((energy_of_member(&w, &g).unwrap() - 12.0).abs() < 1e-3);
        let (sine, _) = make_initial(&ProfileSpec::SineBump { target_mass: 1.0 }, &g, &ts.phi).unwrap();
        let e = energy_of_member(&sine, &g).unwrap();
        assert!((e - PI.powi(4) / 8.0).abs() < 20.0 * h * h);
        assert!(e > ts.target_energy);
        assert!(matches!(energy_of_member(&w.scale(1.1), &g), Err(MinimizeError::MassConstraint { .. })));
        let lifted = Field::new(w.values().to_vec(), 0.1).unwrap();
        assert!(matches!(energy_of_member(&lifted, &g), Err(MinimizeError::NonZeroBoundary(_))));
    }

    fn member_from(raw: &[f64], g: &Grid) -> Option<Field> {
        let f = Field::new(raw.to_vec(), 0.0).ok()?;
        let m = g.integrate(&f).ok()?;
        (m.abs() > 1e-3).then(|| f.scale(1.0 / m))
    }

    proptest! {
        #[test]
        fn any_member_has_energy_above_minimum(raw in prop::collection::vec(-1.0f64..2.0, 29)) {
            let g = unit(29);
            let target = solve_torsion(&g, TORSION_TOL).unwrap().target_energy;
            if let Some(v) = member_from(&raw, &g) {
                prop_assert!(energy_of_member(&v, &g).unwrap() >= target - 1e-12 * target);
            }
        }

        #[test]
        fn energy_is_convex_on_members(
            a in prop::collection::vec(0.0f64..1.0, 21),
            b in prop::collection::vec(0.0f64..1.0, 21),
            theta in 0.0f64..1.0,
        ) {
            let g = unit(21);
            if let (Some(v1), Some(v2)) = (member_from(&a, &g), member_from(&b, &g)) {
                let mix = v1.scale(theta).add(&v2.scale(1.0 - theta)).unwrap();
                let lhs = g.dirichlet_energy(&mix).unwrap();
                let rhs = theta * g.dirichlet_energy(&v1).unwrap() + (1.0 - theta) * g.dirichlet_energy(&v2).unwrap();
                prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
            }
        }

        #[test]
        fn flow_preserves_mass_and_descends(raw in prop::collection::vec(0.1f64..1.0, 15), iters in 1usize..200) {
            let g = unit(15);
            let mut v = member_from(&raw, &g).unwrap();
            let step = default_step(&g);
            let mut value = g.dirichlet_energy(&v).unwrap();
            for _ in 0..iters {
                v = mass_neutral_step(&g, &v, step).unwrap();
                prop_assert!((g.integrate(&v).unwrap() - 1.0).abs() <= 1e-12);
                let next = g.dirichlet_energy(&v).unwrap();
                prop_assert!(next <= value * (1.0 + 1e-14));
                value = next;
            }
        }
    }
}
