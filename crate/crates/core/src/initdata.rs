//! Initial data with prescribed mass, and its ε-regularization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{phi_weighted_sup, Field, Grid, GridError};

/// Default ceiling on `‖u0‖_{Φ,∞}`. Profiles vanishing linearly at the
/// boundary stay O(10) per unit mass; profiles that do not vanish exceed the
/// ceiling once the mesh is fine enough.
pub const DEFAULT_H3_BOUND: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("target mass must be positive and finite, got {0}")]
    BadMass(f64),
    #[error("plateau ramp must lie in (0, 0.5], got {0}")]
    BadRamp(f64),
    #[error("profile is not positive at node {index} (value {value})")]
    NonPositive { index: usize, value: f64 },
    #[error("boundary decay check failed: {0:?}")]
    H3Failed(H3Report),
    #[error("eps must be positive and finite, got {0}")]
    BadEps(f64),
    #[error("mass {mass} cannot be preserved above eps = {eps} (needs mass > eps |Ω| = {floor})")]
    MassInfeasible { mass: f64, eps: f64, floor: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Shape family and target mass of an initial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Multiple of the torsion function.
    TorsionScaled { target_mass: f64 },
    /// Product of half-period sines over the axes.
    SineBump { target_mass: f64 },
    /// Flat top with linear ramps of relative width `ramp` on each axis.
    PlateauBump { target_mass: f64, ramp: f64 },
    /// Interior node samples supplied by the caller.
    CustomSamples { target_mass: f64, values: Vec<f64> },
}

impl ProfileSpec {
    pub fn target_mass(&self) -> f64 {
        match self {
            ProfileSpec::TorsionScaled { target_mass }
            | ProfileSpec::SineBump { target_mass }
            | ProfileSpec::PlateauBump { target_mass, .. }
            | ProfileSpec::CustomSamples { target_mass, .. } => *target_mass,
        }
    }

    pub fn validate(&self) -> Result<(), InitError> {
        let m = self.target_mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(InitError::BadMass(m));
        }
        if let ProfileSpec::PlateauBump { ramp, .. } = self {
            if !(*ramp > 0.0 && *ramp <= 0.5) {
                return Err(InitError::BadRamp(*ramp));
            }
        }
        Ok(())
    }

    /// Same shape with a different target mass.
    pub fn with_mass(&self, mass: f64) -> ProfileSpec {
        let mut out = self.clone();
        match &mut out {
            ProfileSpec::TorsionScaled { target_mass }
            | ProfileSpec::SineBump { target_mass }
            | ProfileSpec::PlateauBump { target_mass, .. }
            | ProfileSpec::CustomSamples { target_mass, .. } => *target_mass = mass,
        }
        out
    }
}

/// Regularity, positivity and boundary-decay summary of an initial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H3Report {
    pub phi_sup: f64,
    pub min_interior: f64,
    pub mass: f64,
    pub energy: f64,
    pub passed: bool,
}

impl H3Report {
    pub fn evaluate(u: &Field, grid: &Grid, phi: &Field, bound: f64) -> Result<Self, InitError> {
        let phi_sup = phi_weighted_sup(u, phi)?;
        let min_interior = u.min();
        let mass = grid.integrate(u)?;
        let energy = grid.dirichlet_energy(u)?;
        let passed = phi_sup.is_finite() && phi_sup <= bound && min_interior > 0.0 && energy.is_finite();
        Ok(Self { phi_sup, min_interior, mass, energy, passed })
    }
}

pub fn make_initial(spec: &ProfileSpec, grid: &Grid, phi: &Field) -> Result<(Field, H3Report), InitError> {
    make_initial_with_bound(spec, grid, phi, DEFAULT_H3_BOUND)
}

/// Builds the profile, rescales it to the exact target mass and checks
/// positivity and boundary decay against `phi`.
pub fn make_initial_with_bound(
    spec: &ProfileSpec,
    grid: &Grid,
    phi: &Field,
    h3_bound: f64,
) -> Result<(Field, H3Report), InitError> {
    spec.validate()?;
    let shape: Vec<f64> = match spec {
        ProfileSpec::TorsionScaled { .. } => phi.values().to_vec(),
        ProfileSpec::SineBump { .. } => {
            grid.sample(|p| p.iter().zip(grid.axes()).map(|(&x, a)| (PI * (x - a.lo) / a.extent()).sin()).product())
        }
        ProfileSpec::PlateauBump { ramp, .. } => grid.sample(|p| {
            p.iter()
                .zip(grid.axes())
                .map(|(&x, a)| {
                    let d = (x - a.lo).min(a.hi - x);
                    (d / (ramp * a.extent())).min(1.0)
                })
                .product()
        }),
        ProfileSpec::CustomSamples { values, .. } => values.clone(),
    };
    let shape = Field::on(grid, shape, 0.0)?;
    if let Some((index, &value)) = shape.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(InitError::NonPositive { index, value });
    }
    let mass = grid.integrate(&shape)?;
    let u0 = shape.scale(spec.target_mass() / mass);
    let report = H3Report::evaluate(&u0, grid, phi, h3_bound)?;
    if !report.passed {
        return Err(InitError::H3Failed(report));
    }
    Ok((u0, report))
}

/// Lifts `u0` to a field bounded below by `eps` with boundary value `eps`
/// and the same discrete mass.
///
/// `ũ = max(u0, eps)`, then `eps + α (ũ - eps)` with `α` fixed by the mass.
pub fn regularize_initial(u0: &Field, eps: f64, grid: &Grid) -> Result<Field, InitError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(InitError::BadEps(eps));
    }
    let mass = grid.integrate(u0)?;
    let floor = eps * grid.volume();
    if mass <= floor {
        return Err(InitError::MassInfeasible { mass, eps, floor });
    }
    let lifted = Field::on(grid, u0.values().iter().map(|&v| v.max(eps)).collect(), eps)?;
    let lifted_excess = grid.integrate(&lifted)? - floor;
    let alpha = (mass - floor) / lifted_excess;
    let values = lifted.values().iter().map(|&v| eps + alpha * (v - eps)).collect();
    Ok(Field::on(grid, values, eps)?)
}
