//! Explicit time stepping of the regularized problem
//!
//! ```text
//! u_t = u Δu + u · min(1/ε, ∫|∇u|²),    u = ε on ∂Ω,
//! ```
//!
//! with regime detection (convergence to `Φ/∫Φ`, decay, blow-up) and a
//! per-record diagnostic time series.
//!
//! Step size is the minimum of a diffusive bound on the coefficient `u`,
//! a bound on `dt · S` for the nonlocal rate `S`, and the time left. Under
//! the diffusive bound every update is a convex combination of neighbours
//! plus a nonnegative source, so the floor `u ≥ ε` holds without clipping;
//! clipped nodes are still counted so that any violation is visible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{phi_weighted_sup, Field, Grid, GridError};
use crate::initdata::{regularize_initial, InitError};
use crate::poisson::TorsionSolution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("step {step} is not allowed in regime {regime:?}")]
    NotRunning { step: u64, regime: Regime },
    #[error("initial field violates the floor/boundary contract: {0}")]
    BadInitial(String),
    #[error("non-positive time step {dt:e} at t = {t}")]
    NonPositiveDt { t: f64, dt: f64 },
    #[error("non-finite values after step {step} (t = {t}); last good record: {last:?}")]
    NonFinite { step: u64, t: f64, last: Option<Box<TimeSeriesRecord>> },
    #[error("eps list must be nonempty and nonincreasing: {0:?}")]
    BadEpsList(Vec<f64>),
    #[error("run with eps = {eps} ended as {regime:?} at t = {t} before checkpoint {t_chk}")]
    AbnormalTermination { eps: f64, regime: Regime, t: f64, t_chk: f64 },
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Running,
    Converged,
    Decayed,
    Blowup,
    TEndReached,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Running => "running",
            Regime::Converged => "converged",
            Regime::Decayed => "decayed",
            Regime::Blowup => "blowup",
            Regime::TEndReached => "t_end_reached",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Boundary value and inverse cap of the nonlocal rate.
    pub eps: f64,
    /// Diffusive safety factor: `dt ≤ cfl_sigma h² / (2 dim max u)`.
    pub cfl_sigma: f64,
    /// Upper bound on `dt · S`.
    pub source_sigma: f64,
    pub t_end: f64,
    /// Blow-up once `max u` exceeds this.
    pub blowup_threshold: f64,
    /// Decay once `max (u - eps)` drops below this.
    pub decay_threshold: f64,
    /// Relative gap of the normalized energy `E / (∫u - eps|Ω|)²` above
    /// `1/∫Φ` that counts as settled.
    pub settle_tol: f64,
    /// Relative H¹ distance to `Φ/∫Φ` (in units of `sqrt(1/∫Φ)`) that
    /// counts as close.
    pub converge_tol: f64,
    pub record_every: usize,
    /// Stop on convergence; refinement studies switch this off to reach a
    /// common checkpoint time.
    pub detect_convergence: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            cfl_sigma: 0.25,
            source_sigma: 0.1,
            t_end: 1e4,
            blowup_threshold: 1e6,
            decay_threshold: 1e-8,
            settle_tol: 1e-6,
            converge_tol: 0.05,
            record_every: 100,
            detect_convergence: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |msg: &str| Err(EvolutionError::Config(msg.to_string()));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive");
        }
        if !(self.cfl_sigma > 0.0 && self.cfl_sigma <= 0.5) {
            return bad("cfl_sigma must lie in (0, 0.5]");
        }
        if !(self.source_sigma > 0.0 && self.source_sigma < 1.0) {
            return bad("source_sigma must lie in (0, 1)");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.blowup_threshold > 0.0) || !(self.decay_threshold > 0.0) {
            return bad("thresholds must be positive");
        }
        if !(self.settle_tol > 0.0) || !(self.converge_tol > 0.0) {
            return bad("settle_tol and converge_tol must be positive");
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub step_index: u64,
    pub last_dt: f64,
    pub regime: Regime,
    /// Total number of node updates that fell below eps and were raised to it.
    pub clipped_nodes: u64,
    /// Smallest `min(u) - eps` seen after any accepted step.
    pub min_excess: f64,
}

impl SimState {
    pub fn new(u: Field, eps: f64) -> Self {
        let min_excess = u.min() - eps;
        Self { t: 0.0, u, step_index: 0, last_dt: 0.0, regime: Regime::Running, clipped_nodes: 0, min_excess }
    }
}

/// Diagnostics of one recorded state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub energy: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub cap_active: bool,
    pub max_u: f64,
    pub h1_dist: f64,
    pub l2_dist: f64,
    pub phi_sup: f64,
}

/// Everything needed to classify a recorded state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCriteria {
    pub eps: f64,
    pub blowup_threshold: f64,
    pub decay_threshold: f64,
    pub settle_tol: f64,
    pub converge_tol: f64,
    pub detect_convergence: bool,
    /// `1/∫Φ_h` on the run's grid.
    pub target_energy: f64,
    /// `|Ω|`.
    pub domain_volume: f64,
}

impl RegimeCriteria {
    pub fn new(cfg: &SimConfig, ts: &TorsionSolution, grid: &Grid) -> Self {
        Self {
            eps: cfg.eps,
            blowup_threshold: cfg.blowup_threshold,
            decay_threshold: cfg.decay_threshold,
            settle_tol: cfg.settle_tol,
            converge_tol: cfg.converge_tol,
            detect_convergence: cfg.detect_convergence,
            target_energy: ts.target_energy,
            domain_volume: grid.volume(),
        }
    }

    /// `E / (∫u - eps|Ω|)²`. Bounded below by `1/∫Φ_h` whenever the excess
    /// mass is positive, with equality only on multiples of `Φ_h`.
    pub fn normalized_energy(&self, rec: &TimeSeriesRecord) -> f64 {
        let excess = rec.mass - self.eps * self.domain_volume;
        if excess > 0.0 {
            rec.energy / (excess * excess)
        } else {
            f64::INFINITY
        }
    }

    /// Growth beyond every bound: `max u` past the threshold, or the nonlocal
    /// rate saturated at `1/eps` while the mass is supercritical.
    pub fn is_blowup(&self, rec: &TimeSeriesRecord) -> bool {
        rec.max_u > self.blowup_threshold || (rec.cap_active && rec.mass > 1.0)
    }

    pub fn is_decayed(&self, rec: &TimeSeriesRecord) -> bool {
        rec.max_u - self.eps < self.decay_threshold
    }

    /// Shape settled onto the torsion profile and the state is close to `Φ/∫Φ`.
    pub fn is_converged(&self, rec: &TimeSeriesRecord) -> bool {
        if !self.detect_convergence {
            return false;
        }
        let shape_gap = (self.normalized_energy(rec) - self.target_energy) / self.target_energy;
        let rel_dist = rec.h1_dist / self.target_energy.sqrt();
        shape_gap <= self.settle_tol && rel_dist <= self.converge_tol
    }

    /// Terminal regime implied by a single record, if any.
    pub fn terminal(&self, rec: &TimeSeriesRecord) -> Option<Regime> {
        if self.is_blowup(rec) {
            Some(Regime::Blowup)
        } else if self.is_decayed(rec) {
            Some(Regime::Decayed)
        } else if self.is_converged(rec) {
            Some(Regime::Converged)
        } else {
            None
        }
    }
}

/// `S = min(1/eps, E(u))` and whether the cap binds.
pub fn nonlocal_rate(u: &Field, grid: &Grid, eps: f64) -> Result<(f64, bool), GridError> {
    let energy = grid.dirichlet_energy(u)?;
    Ok(rate_from_energy(energy, eps))
}

fn rate_from_energy(energy: f64, eps: f64) -> (f64, bool) {
    let cap = 1.0 / eps;
    (energy.min(cap), energy > cap)
}

const TINY_RATE: f64 = 1e-300;

/// Largest admissible step from state time `t`.
pub fn propose_dt(u: &Field, s: f64, t: f64, cfg: &SimConfig, grid: &Grid) -> Result<f64, EvolutionError> {
    let h = grid.h_min();
    let diffusive = cfg.cfl_sigma * h * h / (2.0 * grid.dim() as f64 * u.max());
    let source = cfg.source_sigma / s.max(TINY_RATE);
    let dt = diffusive.min(source).min(cfg.t_end - t);
    if dt > 0.0 && dt.is_finite() {
        Ok(dt)
    } else {
        Err(EvolutionError::NonPositiveDt { t, dt })
    }
}

struct Stepper<'a> {
    grid: &'a Grid,
    cfg: &'a SimConfig,
    lap: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(grid: &'a Grid, cfg: &'a SimConfig) -> Self {
        Self { grid, cfg, lap: vec![0.0; grid.len()] }
    }

    fn advance(&mut self, state: &mut SimState) -> Result<(), EvolutionError> {
        if state.regime != Regime::Running {
            return Err(EvolutionError::NotRunning { step: state.step_index, regime: state.regime });
        }
        let eps = self.cfg.eps;
        let energy = self.grid.energy_raw(state.u.values(), eps);
        let (s, _) = rate_from_energy(energy, eps);
        let remaining = self.cfg.t_end - state.t;
        let dt = propose_dt(&state.u, s, state.t, self.cfg, self.grid)?;

        self.grid.laplacian_into(state.u.values(), eps, &mut self.lap);
        let mut values = std::mem::take(&mut state.u).into_values();
        let mut clipped = 0u64;
        let mut finite = true;
        let mut min_val = f64::INFINITY;
        for (v, l) in values.iter_mut().zip(&self.lap) {
            let mut next = *v + dt * (*v * l + s * *v);
            finite &= next.is_finite();
            if next < eps {
                clipped += 1;
                next = eps;
            }
            min_val = min_val.min(next);
            *v = next;
        }
        state.u = Field::from_parts_unchecked(values, eps);
        state.step_index += 1;
        if !finite {
            return Err(EvolutionError::NonFinite { step: state.step_index, t: state.t + dt, last: None });
        }
        state.t = if dt == remaining { self.cfg.t_end } else { state.t + dt };
        state.last_dt = dt;
        state.clipped_nodes += clipped;
        state.min_excess = state.min_excess.min(min_val - eps);
        Ok(())
    }
}

/// One explicit Euler step `u⁺ = u + dt (u Δ_h u + S u)` with ghost value eps.
pub fn step(state: &SimState, cfg: &SimConfig, grid: &Grid) -> Result<SimState, EvolutionError> {
    if state.u.len() != grid.len() {
        return Err(GridError::ShapeMismatch { expected: grid.len(), got: state.u.len() }.into());
    }
    let mut next = state.clone();
    Stepper::new(grid, cfg).advance(&mut next)?;
    Ok(next)
}

/// Computes the diagnostic record of `state`.
pub fn record_state(
    state: &SimState,
    grid: &Grid,
    eps: f64,
    limit: &Field,
    phi: &Field,
) -> Result<TimeSeriesRecord, GridError> {
    let u = &state.u;
    let energy = grid.dirichlet_energy(u)?;
    let (s, cap_active) = rate_from_energy(energy, eps);
    Ok(TimeSeriesRecord {
        step: state.step_index,
        t: state.t,
        dt: state.last_dt,
        mass: grid.integrate(u)?,
        energy,
        s,
        cap_active,
        max_u: u.max(),
        h1_dist: grid.h1_distance(u, limit)?,
        l2_dist: grid.l2_distance(u, limit)?,
        phi_sup: phi_weighted_sup(&u.map(|v| v - eps), phi)?,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SimState,
    pub records: Vec<TimeSeriesRecord>,
}

/// Steps `u0eps` until a terminal regime.
///
/// Blow-up and decay are tested after every step; convergence is tested on
/// recorded states only, so the final record alone determines the regime.
pub fn run(u0eps: &Field, cfg: &SimConfig, grid: &Grid, ts: &TorsionSolution) -> Result<RunOutcome, EvolutionError> {
    cfg.validate()?;
    if u0eps.len() != grid.len() {
        return Err(GridError::ShapeMismatch { expected: grid.len(), got: u0eps.len() }.into());
    }
    let eps = cfg.eps;
    if (u0eps.boundary_value() - eps).abs() > 1e-14 * eps.max(1.0) {
        return Err(EvolutionError::BadInitial(format!(
            "boundary value {} differs from eps {}",
            u0eps.boundary_value(),
            eps
        )));
    }
    if u0eps.min() < eps {
        return Err(EvolutionError::BadInitial(format!("min {} below eps {}", u0eps.min(), eps)));
    }
    let u0 = Field::on(grid, u0eps.values().to_vec(), eps)?;
    let criteria = RegimeCriteria::new(cfg, ts, grid);
    let limit = ts.stationary_limit();
    let mut state = SimState::new(u0, eps);
    let mut records = vec![record_state(&state, grid, eps, &limit, &ts.phi)?];
    let mut stepper = Stepper::new(grid, cfg);
    let record_every = cfg.record_every as u64;

    loop {
        if state.t >= cfg.t_end {
            state.regime = Regime::TEndReached;
            break;
        }
        if let Err(err) = stepper.advance(&mut state) {
            return Err(match err {
                EvolutionError::NonFinite { step, t, .. } => {
                    EvolutionError::NonFinite { step, t, last: records.last().cloned().map(Box::new) }
                }
                other => other,
            });
        }
        let max_u = state.u.max();
        let quick_blowup = max_u > cfg.blowup_threshold || {
            let energy = grid.energy_raw(state.u.values(), eps);
            energy > 1.0 / eps && grid.integrate_raw(state.u.values(), eps) > 1.0
        };
        if quick_blowup {
            state.regime = Regime::Blowup;
            break;
        }
        if max_u - eps < cfg.decay_threshold {
            state.regime = Regime::Decayed;
            break;
        }
        if state.step_index.is_multiple_of(record_every) {
            let rec = record_state(&state, grid, eps, &limit, &ts.phi)?;
            let converged = criteria.is_converged(&rec);
            records.push(rec);
            if converged {
                state.regime = Regime::Converged;
                return Ok(RunOutcome { state, records });
            }
        }
    }
    if records.last().map(|r| r.step) != Some(state.step_index) {
        records.push(record_state(&state, grid, eps, &limit, &ts.phi)?);
    }
    Ok(RunOutcome { state, records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub eps: f64,
    pub energy: f64,
    pub mass: f64,
    /// L² distance to the previous row's solution at the checkpoint.
    pub l2_gap: Option<f64>,
    pub steps: u64,
    /// Largest recorded `max u` over the run.
    pub sup_u: f64,
}

/// Runs each eps to the common checkpoint `t_chk` from the regularization
/// of the same `u0`, and reports successive L² gaps.
pub fn eps_refinement_study(
    u0: &Field,
    eps_list: &[f64],
    cfg: &SimConfig,
    grid: &Grid,
    ts: &TorsionSolution,
    t_chk: f64,
) -> Result<Vec<RefinementRow>, EvolutionError> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(EvolutionError::BadEpsList(eps_list.to_vec()));
    }
    let finals: Vec<(f64, SimState, f64)> = eps_list
        .par_iter()
        .map(|&eps| {
            let run_cfg = SimConfig { eps, t_end: t_chk, detect_convergence: false, ..cfg.clone() };
            let u0eps = regularize_initial(u0, eps, grid)?;
            let out = run(&u0eps, &run_cfg, grid, ts)?;
            if out.state.regime != Regime::TEndReached {
                return Err(EvolutionError::AbnormalTermination {
                    eps,
                    regime: out.state.regime,
                    t: out.state.t,
                    t_chk,
                });
            }
            let sup_u = out.records.iter().map(|r| r.max_u).fold(0.0, f64::max);
            Ok((eps, out.state, sup_u))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(finals.len());
    for (k, (eps, state, sup_u)) in finals.iter().enumerate() {
        let l2_gap = match k {
            0 => None,
            _ => Some(grid.l2_distance(&state.u, &finals[k - 1].1.u)?),
        };
        rows.push(RefinementRow {
            eps: *eps,
            energy: grid.dirichlet_energy(&state.u)?,
            mass: grid.integrate(&state.u)?,
            l2_gap,
            steps: state.step_index,
            sup_u: *sup_u,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initdata::{make_initial, ProfileSpec};
    use crate::poisson::{solve_torsion, DEFAULT_TOL};

    fn setup(n: usize) -> (Grid, TorsionSolution) {
        let g = Grid::interval(0.0, 1.0, n).unwrap();
        let ts = solve_torsion(&g, DEFAULT_TOL).unwrap();
        (g, ts)
    }

    #[test]
    fn rate_examples() {
        let (g, ts) = setup(99);
        let w = ts.stationary_limit();
        let (s, cap) = nonlocal_rate(&w, &g, 0.1).unwrap();
        assert!(cap && (s - 10.0).abs() < 1e-12);
        let (s, cap) = nonlocal_rate(&w, &g, 0.05).unwrap();
        assert!(!cap && (s - 12.0).abs() < 0.01);
        let flat = Field::constant(&g, 0.3);
        assert_eq!(nonlocal_rate(&flat, &g, 0.3).unwrap(), (0.0, false));
    }

    #[test]
    fn dt_bounds() {
        let g = Grid::interval(0.0, 1.0, 99).unwrap(); // h = 0.01
        let mut vals = vec![1.0; 99];
        vals[50] = 1.5;
        let u = Field::new(vals, 1e-3).unwrap();
        let cfg = SimConfig::default();
        let dt = propose_dt(&u, 12.0, 0.0, &cfg, &g).unwrap();
        let diffusive = 0.25 * 1e-4 / 3.0;
        assert!((dt - diffusive).abs() < 1e-18);
        assert!(0.1 / 12.0 > diffusive);
        let near_end = SimConfig { t_end: 1e-6, ..cfg.clone() };
        assert_eq!(propose_dt(&u, 12.0, 0.0, &near_end, &g).unwrap(), 1e-6);
        assert!(matches!(propose_dt(&u, 12.0, 1e-6, &near_end, &g), Err(EvolutionError::NonPositiveDt { .. })));
    }

    #[test]
    fn flat_state_is_fixed() {
        let (g, _) = setup(31);
        let cfg = SimConfig { eps: 0.02, ..SimConfig::default() };
        let state = SimState::new(Field::constant(&g, 0.02), 0.02);
        let next = step(&state, &cfg, &g).unwrap();
        assert_eq!(next.u, state.u);
        assert!(next.t > 0.0);
    }

    #[test]
    fn shifted_torsion_profile_is_discrete_fixed_point() {
        let (g, ts) = setup(99);
        let eps = 1e-4;
        let u = ts.stationary_limit().map(|v| v + eps);
        let u = Field::new(u.values().to_vec(), eps).unwrap();
        let cfg = SimConfig { eps, ..SimConfig::default() };
        let next = step(&SimState::new(u.clone(), eps), &cfg, &g).unwrap();
        assert!(next.u.max_abs_diff(&u) < 1e-12 * next.last_dt.max(1e-300) + 1e-15);
    }

    #[test]
    fn one_step_does_not_increase_subcritical_mass() {
        let (g, ts) = setup(99);
        let (u0, _) = make_initial(&ProfileSpec::SineBump { target_mass: 1.0 }, &g, &ts.phi).unwrap();
        let cfg = SimConfig::default();
        let ue = regularize_initial(&u0, cfg.eps, &g).unwrap();
        let s0 = SimState::new(ue, cfg.eps);
        let s1 = step(&s0, &cfg, &g).unwrap();
        let (m0, m1) = (g.integrate(&s0.u).unwrap(), g.integrate(&s1.u).unwrap());
        assert!(m1 <= m0 + 1e-14, "{m0} -> {m1}");
        assert_eq!(s1.clipped_nodes, 0);
        let (e0, e1) = (g.dirichlet_energy(&s0.u).unwrap(), g.dirichlet_energy(&s1.u).unwrap());
        assert!(e1 <= e0);
    }

    #[test]
    fn step_refuses_terminal_state() {
        let (g, _) = setup(9);
        let mut st = SimState::new(Field::constant(&g, 0.1), 0.1);
        st.regime = Regime::Decayed;
        let cfg = SimConfig { eps: 0.1, ..SimConfig::default() };
        assert!(matches!(step(&st, &cfg, &g), Err(EvolutionError::NotRunning { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        for bad in [
            SimConfig { eps: 0.0, ..SimConfig::default() },
            SimConfig { cfl_sigma: 0.6, ..SimConfig::default() },
            SimConfig { source_sigma: 1.0, ..SimConfig::default() },
            SimConfig { t_end: -1.0, ..SimConfig::default() },
            SimConfig { record_every: 0, ..SimConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(EvolutionError::Config(_))));
        }
    }

    #[test]
    fn run_rejects_unregularized_data() {
        let (g, ts) = setup(19);
        let cfg = SimConfig::default();
        let w = ts.stationary_limit();
        assert!(matches!(run(&w, &cfg, &g, &ts), Err(EvolutionError::BadInitial(_))));
    }

    #[test]
    fn short_run_respects_floor_and_t_end() {
        let (g, ts) = setup(49);
        let (u0, _) = make_initial(&ProfileSpec::SineBump { target_mass: 1.0 }, &g, &ts.phi).unwrap();
        let cfg = SimConfig { t_end: 1e-3, record_every: 7, detect_convergence: false, ..SimConfig::default() };
        let ue = regularize_initial(&u0, cfg.eps, &g).unwrap();
        let out = run(&ue, &cfg, &g, &ts).unwrap();
        assert_eq!(out.state.regime, Regime::TEndReached);
        assert_eq!(out.state.t, 1e-3);
        assert_eq!(out.state.clipped_nodes, 0);
        assert!(out.state.min_excess >= 0.0);
        assert_eq!(out.records.first().unwrap().step, 0);
        assert_eq!(out.records.last().unwrap().step, out.state.step_index);
        assert!(out.records.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn refinement_study_validates_list() {
        let (g, ts) = setup(19);
        let u0 = ts.stationary_limit();
        let cfg = SimConfig::default();
        assert!(matches!(
            eps_refinement_study(&u0, &[1e-3, 2e-3], &cfg, &g, &ts, 0.01),
            Err(EvolutionError::BadEpsList(_))
        ));
        let rows = eps_refinement_study(&u0, &[2e-3, 2e-3], &cfg, &g, &ts, 0.01).unwrap();
        assert_eq!(rows[1].l2_gap, Some(0.0));
    }

    #[test]
    fn refinement_energies_respect_minimum() {
        let (g, ts) = setup(49);
        let (u0, _) = make_initial(&ProfileSpec::SineBump { target_mass: 1.0 }, &g, &ts.phi).unwrap();
        let rows = eps_refinement_study(&u0, &[1e-2, 5e-3, 2.5e-3], &SimConfig::default(), &g, &ts, 0.02).unwrap();
        for r in &rows {
            // E(u) = E(u - eps) ≥ (∫(u - eps))² / ∫Φ_h.
            let excess = r.mass - r.eps * g.volume();
            assert!(r.energy >= ts.target_energy * excess * excess * (1.0 - 1e-12), "{r:?}");
            assert!(r.sup_u.is_finite());
        }
    }
}
