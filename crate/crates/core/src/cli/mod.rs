//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, all enabled checks pass |
//! | 1 | run completed but a check failed |
//! | 2 | invalid configuration or arguments |
//! | 3 | I/O failure (config unreadable, output unwritable) |
//! | 4 | malformed or unusable series CSV |
//! | 5 | torsion solver failure |
//! | 6 | initial data rejected |
//! | 7 | evolution failure |
//! | 8 | minimization failure |

pub mod config;
pub mod series;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{verify, DiagnosticsError, VerificationReport};
use crate::evolution::{run, EvolutionError, RegimeCriteria, RunOutcome, SimConfig};
use crate::grid::{Grid, GridError};
use crate::initdata::{make_initial, regularize_initial, InitError};
use crate::poisson::{solve_torsion, PoissonError, TorsionSolution};
use crate::variational::{minimize_dirichlet, stability_bound, uniform_member, MinimizeError};

pub use config::{resolve, DomainSpec, MinimizeInit, MinimizeSpec, OutputSpec, RunConfig, SweepSpec, TorsionSpec};
pub use series::{read_series, write_series, SeriesError, SERIES_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Series { path: PathBuf, source: SeriesError },
    #[error("series unusable: {0}")]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Evolution(EvolutionError),
    #[error(transparent)]
    Minimize(MinimizeError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Series { .. } | CliError::Diagnostics(_) => 4,
            CliError::Poisson(_) => 5,
            CliError::Init(_) => 6,
            CliError::Evolution(_) => 7,
            CliError::Minimize(_) => 8,
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EvolutionError> for CliError {
    fn from(e: EvolutionError) -> Self {
        match e {
            EvolutionError::Init(e) => CliError::Init(e),
            EvolutionError::Config(msg) => CliError::Config(msg),
            other => CliError::Evolution(other),
        }
    }
}

impl From<MinimizeError> for CliError {
    fn from(e: MinimizeError) -> Self {
        match e {
            MinimizeError::Oracle(e) => CliError::Poisson(e),
            other => CliError::Minimize(other),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "replab", version, about = "Degenerate nonlocal parabolic laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for relative output paths.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "REPLAB_JOBS")]
    pub jobs: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the torsion problem and write Φ samples.
    Torsion,
    /// Run one trajectory, write its series and verification report.
    Simulate,
    /// Minimize the Dirichlet energy over unit-mass fields.
    Minimize,
    /// Run the cartesian product of sweep.masses × sweep.eps × sweep.n.
    Sweep,
    /// Check a recorded series.
    Verify {
        /// Series CSV; defaults to outputs.series_path.
        #[arg(long)]
        series: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Context {
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub quiet: bool,
}

impl Context {
    fn path(&self, p: &Path) -> PathBuf {
        resolve(self.out_dir.as_deref(), p)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    /// Creates the output file (and the output directory) up front so that
    /// unwritable paths fail before any compute.
    fn create(&self, p: &Path) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.path(p);
        if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        let file = File::create(&path).map_err(io_err(&path))?;
        Ok((path, BufWriter::new(file)))
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let cfg = RunConfig::from_json(&text).map_err(CliError::Config)?;
    if cli.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be positive".into()));
    }
    let ctx = Context { out_dir: cli.out.clone(), jobs: cli.jobs, quiet: cli.quiet };
    match &cli.command {
        Command::Torsion => cmd_torsion(&cfg, &ctx),
        Command::Simulate => cmd_simulate(&cfg, &ctx),
        Command::Minimize => cmd_minimize(&cfg, &ctx),
        Command::Sweep => cmd_sweep(&cfg, &ctx),
        Command::Verify { series } => {
            let series = series.clone().unwrap_or_else(|| ctx.path(&cfg.outputs.series_path));
            cmd_verify(&series, &cfg, &ctx)
        }
    }
}

fn write_csv<W: Write>(path: &Path, out: W, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let to_io = |e: csv::Error| CliError::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(to_io)?;
    for row in rows {
        w.write_record(row).map_err(to_io)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<W: Write>(path: &Path, mut out: W, value: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.into() })?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err(path))
}

pub fn cmd_torsion(cfg: &RunConfig, ctx: &Context) -> Result<bool, CliError> {
    let (path, out) = ctx.create(&cfg.outputs.torsion_path)?;
    let grid = cfg.domain.grid().map_err(CliError::Config)?;
    let ts = solve_torsion(&grid, cfg.torsion.tol)?;
    ctx.say(format!("integral     {:.12e}", ts.torsion_integral));
    ctx.say(format!("target       {:.12e}", ts.target_energy));
    ctx.say(format!("residual     {:.3e}", ts.solver_residual));
    ctx.say(format!("iterations   {}", ts.iterations));

    let mut header: Vec<String> = ["x", "y"].iter().take(grid.dim()).map(|s| s.to_string()).collect();
    header.push("phi".into());
    let rows: Vec<Vec<String>> = ts
        .phi
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut row: Vec<String> = grid.point(k).iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{v:e}"));
            row
        })
        .collect();
    write_csv(&path, out, &header, &rows)?;
    ctx.say(format!("wrote {}", path.display()));
    Ok(true)
}

/// Result of one configured simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub grid: Grid,
    pub torsion: TorsionSolution,
    pub outcome: RunOutcome,
    pub report: VerificationReport,
}

/// Builds the grid, `Φ`, the regularized initial data, runs and verifies.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation, CliError> {
    let grid = cfg.domain.grid().map_err(CliError::Config)?;
    let torsion = solve_torsion(&grid, cfg.torsion.tol)?;
    let (u0, _) = make_initial(&cfg.profile, &grid, &torsion.phi)?;
    let u0eps = regularize_initial(&u0, cfg.sim.eps, &grid)?;
    let outcome = run(&u0eps, &cfg.sim, &grid, &torsion)?;
    let criteria = RegimeCriteria::new(&cfg.sim, &torsion, &grid);
    let mut report = verify(&outcome.records, &criteria, &cfg.verify)?;
    let state = &outcome.state;
    if state.clipped_nodes > 0 || state.min_excess < 0.0 {
        report.passed = false;
        report.notes.push(format!(
            "floor violated: {} clipped node updates, min(u) - eps = {:e}",
            state.clipped_nodes, state.min_excess
        ));
    }
    if state.regime != report.regime {
        report.notes.push(format!("run stopped as {}, series classifies as {}", state.regime, report.regime));
    }
    Ok(Simulation { grid, torsion, outcome, report })
}

fn write_series_file<W: Write>(path: &Path, out: W, sim: &Simulation) -> Result<(), CliError> {
    write_series(out, &sim.outcome.records).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.into() })
}

pub fn cmd_simulate(cfg: &RunConfig, ctx: &Context) -> Result<bool, CliError> {
    let (series_path, series_out) = ctx.create(&cfg.outputs.series_path)?;
    let (report_path, report_out) = ctx.create(&cfg.outputs.report_path)?;
    let sim = simulate(cfg)?;
    write_series_file(&series_path, series_out, &sim)?;
    write_json(&report_path, report_out, &sim.report)?;
    let last = sim.outcome.records.last().expect("run records the initial state");
    ctx.say(format!("regime       {}", sim.report.regime));
    ctx.say(format!("t            {:e}", sim.outcome.state.t));
    ctx.say(format!("steps        {}", sim.outcome.state.step_index));
    ctx.say(format!("energy       {:.9} (target {:.9})", last.energy, sim.torsion.target_energy));
    ctx.say(format!("h1 gap       {:e}", sim.report.h1_limit_gap));
    for note in &sim.report.notes {
        ctx.say(format!("note: {note}"));
    }
    ctx.say(if sim.report.passed { "PASS" } else { "FAIL" });
    Ok(sim.report.passed)
}

pub fn cmd_minimize(cfg: &RunConfig, ctx: &Context) -> Result<bool, CliError> {
    let grid = cfg.domain.grid().map_err(CliError::Config)?;
    let spec = &cfg.minimize;
    let init = match spec.init {
        MinimizeInit::Uniform => uniform_member(&grid),
        MinimizeInit::Stationary => solve_torsion(&grid, cfg.torsion.tol)?.stationary_limit(),
        MinimizeInit::Profile => {
            let ts = solve_torsion(&grid, cfg.torsion.tol)?;
            make_initial(&cfg.profile.with_mass(1.0), &grid, &ts.phi)?.0
        }
    };
    let step = spec.step.unwrap_or(spec.step_fraction * stability_bound(&grid));
    let res = minimize_dirichlet(&grid, &init, step, spec.tol, spec.max_iter)?;
    ctx.say(format!("value        {:.12}", res.value));
    ctx.say(format!("iterations   {}", res.iterations));
    ctx.say(format!("kkt          {:e}", res.kkt_residual));
    ctx.say(format!("multiplier   {:.12}", res.multiplier));
    ctx.say(format!("oracle gap   {:e} (value), {:e} (H1)", res.oracle_value_gap, res.oracle_h1_gap));
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub mass: f64,
    pub eps: f64,
    pub h: f64,
    pub regime: String,
    pub final_energy: Option<f64>,
    pub h1_gap: Option<f64>,
    pub passed: bool,
    pub error: Option<String>,
}

/// Runs every cell of the sweep; failed cells are recorded and the sweep
/// continues.
pub fn sweep(cfg: &RunConfig, ctx: &Context) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate_sweep().map_err(CliError::Config)?;
    let s = &cfg.sweep;
    let mut cells = Vec::new();
    for &mass in &s.masses {
        for &eps in &s.eps {
            for &n in &s.n {
                cells.push((cells.len(), mass, eps, n));
            }
        }
    }
    let run_cell = |&(idx, mass, eps, n): &(usize, f64, f64, usize)| -> SweepRow {
        let cell_cfg = RunConfig {
            domain: cfg.domain.with_nodes(n),
            profile: cfg.profile.with_mass(mass),
            sim: SimConfig { eps, ..cfg.sim.clone() },
            verify: crate::diagnostics::VerifyTolerances { expect_regime: None, ..cfg.verify.clone() },
            ..cfg.clone()
        };
        let h = cell_cfg.domain.grid().map(|g| g.h_min()).unwrap_or(f64::NAN);
        let series_name = PathBuf::from(format!("cell_{idx:03}_m{mass}_eps{eps}_n{n}.csv"));
        let result = ctx.create(&series_name).and_then(|(path, out)| {
            let sim = simulate(&cell_cfg)?;
            write_series_file(&path, out, &sim)?;
            Ok(sim)
        });
        match result {
            Ok(sim) => SweepRow {
                mass,
                eps,
                h,
                regime: sim.report.regime.to_string(),
                final_energy: sim.outcome.records.last().map(|r| r.energy),
                h1_gap: Some(sim.report.h1_limit_gap),
                passed: sim.report.passed,
                error: None,
            },
            Err(e) => SweepRow {
                mass,
                eps,
                h,
                regime: "error".into(),
                final_energy: None,
                h1_gap: None,
                passed: false,
                error: Some(e.to_string()),
            },
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = ctx.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(pool.install(|| cells.par_iter().map(run_cell).collect()))
}

pub fn cmd_sweep(cfg: &RunConfig, ctx: &Context) -> Result<bool, CliError> {
    cfg.validate_sweep().map_err(CliError::Config)?;
    let (path, out) = ctx.create(&cfg.outputs.summary_path)?;
    let rows = sweep(cfg, ctx)?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    let header: Vec<String> = ["mass", "eps", "h", "regime", "final_energy", "h1_gap", "passed", "error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format!("{:e}", r.mass),
                format!("{:e}", r.eps),
                format!("{:e}", r.h),
                r.regime.clone(),
                opt(r.final_energy),
                opt(r.h1_gap),
                u8::from(r.passed).to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&path, out, &header, &table)?;
    for r in &rows {
        ctx.say(format!("mass {:<6} eps {:<8e} h {:<10.4e} {}", r.mass, r.eps, r.h, r.regime));
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    ctx.say(format!("{} cells, {failed} failed; wrote {}", rows.len(), path.display()));
    Ok(failed == 0)
}

pub fn cmd_verify(series_path: &Path, cfg: &RunConfig, ctx: &Context) -> Result<bool, CliError> {
    let file = File::open(series_path).map_err(io_err(series_path))?;
    let records = read_series(std::io::BufReader::new(file))
        .map_err(|source| CliError::Series { path: series_path.into(), source })?;
    let (report_path, report_out) = ctx.create(&cfg.outputs.report_path)?;
    let grid = cfg.domain.grid().map_err(CliError::Config)?;
    let ts = solve_torsion(&grid, cfg.torsion.tol)?;
    let criteria = RegimeCriteria::new(&cfg.sim, &ts, &grid);
    let report = verify(&records, &criteria, &cfg.verify)?;
    write_json(&report_path, report_out, &report)?;
    ctx.say(format!("regime            {}", report.regime));
    ctx.say(format!(
        "energy monotone   {} (worst {:e})",
        report.energy_monotone.passed, report.energy_monotone.worst_violation
    ));
    ctx.say(format!(
        "mass monotone     {} (worst {:e})",
        report.mass_monotone.passed, report.mass_monotone.worst_violation
    ));
    ctx.say(format!("mass identity     {:e}", report.mass_ode_residual));
    for note in &report.notes {
        ctx.say(format!("note: {note}"));
    }
    ctx.say(if report.passed { "PASS" } else { "FAIL" });
    Ok(report.passed)
}
