//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::VerifyTolerances;
use crate::evolution::SimConfig;
use crate::grid::Grid;
use crate::initdata::ProfileSpec;
use crate::variational;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dim: usize,
    /// One `[lo, hi]` pair per axis.
    pub bounds: Vec<(f64, f64)>,
    /// Interior nodes per axis.
    pub n: Vec<usize>,
}

impl DomainSpec {
    pub fn grid(&self) -> Result<Grid, String> {
        Grid::new(self.dim, &self.bounds, &self.n).map_err(|e| e.to_string())
    }

    /// The same domain with `n` interior nodes on every axis.
    pub fn with_nodes(&self, n: usize) -> DomainSpec {
        DomainSpec { n: vec![n; self.dim], ..self.clone() }
    }
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self { dim: 1, bounds: vec![(0.0, 1.0)], n: vec![99] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub series_path: PathBuf,
    pub report_path: PathBuf,
    pub torsion_path: PathBuf,
    pub summary_path: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            series_path: "series.csv".into(),
            report_path: "report.json".into(),
            torsion_path: "torsion.csv".into(),
            summary_path: "sweep_summary.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorsionSpec {
    pub tol: f64,
}

impl Default for TorsionSpec {
    fn default() -> Self {
        Self { tol: crate::poisson::DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizeInit {
    /// Constant unit-mass field.
    Uniform,
    /// `Φ_h / ∫Φ_h`, already optimal.
    Stationary,
    /// The configured profile rescaled to unit mass.
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeSpec {
    pub init: MinimizeInit,
    /// Step as a fraction of the stability bound; ignored when `step` is set.
    pub step_fraction: f64,
    pub step: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MinimizeSpec {
    fn default() -> Self {
        Self {
            init: MinimizeInit::Uniform,
            step_fraction: variational::DEFAULT_STEP_FRACTION,
            step: None,
            tol: variational::DEFAULT_TOL,
            max_iter: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub masses: Vec<f64>,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: DomainSpec,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Reserved for randomized profiles; every simulation is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub torsion: TorsionSpec,
    #[serde(default)]
    pub minimize: MinimizeSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub verify: VerifyTolerances,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every nested invariant; sweep lists are checked by the sweep
    /// command, which is the only one that reads them.
    pub fn validate(&self) -> Result<(), String> {
        self.domain.grid()?;
        self.profile.validate().map_err(|e| e.to_string())?;
        self.sim.validate().map_err(|e| e.to_string())?;
        if !(self.torsion.tol > 0.0) {
            return Err(format!("torsion.tol must be positive, got {}", self.torsion.tol));
        }
        let m = &self.minimize;
        if !(m.step_fraction > 0.0 && m.step_fraction.is_finite()) {
            return Err(format!("minimize.step_fraction must be positive, got {}", m.step_fraction));
        }
        if let Some(step) = m.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(format!("minimize.step must be positive, got {step}"));
            }
        }
        if !(m.tol >= 0.0) {
            return Err(format!("minimize.tol must be nonnegative, got {}", m.tol));
        }
        let v = &self.verify;
        for (name, x) in [
            ("verify.energy_slack_per_step", v.energy_slack_per_step),
            ("verify.mass_slack_per_step", v.mass_slack_per_step),
            ("verify.mass_ode_constant", v.mass_ode_constant),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(format!("{name} must be nonnegative, got {x}"));
            }
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<(), String> {
        let s = &self.sweep;
        if s.masses.is_empty() || s.eps.is_empty() || s.n.is_empty() {
            return Err("sweep.masses, sweep.eps and sweep.n must be nonempty".into());
        }
        for &m in &s.masses {
            self.profile.with_mass(m).validate().map_err(|e| e.to_string())?;
        }
        for &eps in &s.eps {
            SimConfig { eps, ..self.sim.clone() }.validate().map_err(|e| e.to_string())?;
        }
        for &n in &s.n {
            self.domain.with_nodes(n).grid()?;
        }
        Ok(())
    }
}

/// Joins relative output paths onto `out_dir` when one is given.
pub fn resolve(out_dir: Option<&Path>, path: &Path) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}
