//! Commands behind the `pbal` binary. Each `cmd_*` returns the process exit
//! code: 0 success, 1 invariant violation, 2 usage or configuration error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{l1_distance, to_density};
use crate::diagnostics::{
    check_bounds, default_entropy_residual, envelopes, equicontinuity_modulus, integrate_audited,
    DiagnosticsReport, EnvelopeInputs, PhiGrid,
};
use crate::error::{Error, Result};
use crate::init::quantile_init;
use crate::integrator::{integrate, SolverConfig, Trajectory};
use crate::output::{
    density_svg, envelope_svg, write_envelope_csv, write_grid_csv, write_json, write_snapshots_csv,
    write_text, OutputFile, RunManifest,
};
use crate::quadrature::trapezoid;
use crate::reference::{compare_l1, fv_run, Flux, FvConfig};
use crate::scenario::{builtin_catalog, resolve_scenario, Scenario, CATALOG};

pub const DEFAULT_SNAPSHOTS: usize = 11;
pub const AUDIT_SNAPSHOTS: usize = 1025;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pbal",
    version,
    about = "Particle solver for 1D nonlocal balance laws with congestion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in scenarios.
    Catalog,
    /// Integrate one scenario and write snapshots, a manifest and plots.
    Run(RunArgs),
    /// Self-convergence table over several particle counts.
    Sweep(SweepArgs),
    /// Bound, structural, entropy and equicontinuity checks for one run.
    Audit(AuditArgs),
    /// Compare against the finite-volume reference solver.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Catalog name or path of a scenario file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub abs_tol: f64,
    /// Number of equispaced snapshots, endpoints included (11 by default,
    /// 1025 for `audit`, whose entropy residual integrates over them in time).
    #[arg(long)]
    pub snapshots: Option<usize>,
}

impl SolverArgs {
    pub fn config(&self) -> Result<SolverConfig> {
        self.config_with_default(DEFAULT_SNAPSHOTS)
    }

    pub fn config_with_default(&self, snapshots: usize) -> Result<SolverConfig> {
        let count = self.snapshots.unwrap_or(snapshots);
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "--t-end must be positive, got {}",
                self.t_end
            )));
        }
        if count < 2 {
            return Err(Error::Config("--snapshots must be at least 2".into()));
        }
        let cfg = SolverConfig::new(self.t_end)
            .with_snapshots(count)
            .with_tolerances(self.rel_tol, self.abs_tol);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write an SVG plot of the density at the snapshot times.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated particle counts.
    #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
    pub n: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Test-function grid as `TIMESxPOSITIONSxWIDTHS`.
    #[arg(long, default_value = "3x5x2")]
    pub phi_grid: String,
    /// Entropy levels as fractions of the maximal density.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1,1.1")]
    pub c_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FluxArg {
    MirroredUpwind,
    Rusanov,
}

impl From<FluxArg> for Flux {
    fn from(f: FluxArg) -> Self {
        match f {
            FluxArg::MirroredUpwind => Flux::MirroredUpwind,
            FluxArg::Rusanov => Flux::Rusanov,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 800)]
    pub n: usize,
    /// Number of grid cells.
    #[arg(long, default_value_t = 2000)]
    pub j: usize,
    #[arg(long, value_enum, default_value = "mirrored-upwind")]
    pub flux: FluxArg,
    /// Grid half-width; defaults to 1.1 times the support envelope at t_end.
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_phi_grid(s: &str) -> Result<PhiGrid> {
    let parts: Vec<&str> = s.split('x').collect();
    let bad = || {
        Error::Config(format!(
            "--phi-grid expects TxXxW with positive integers, got '{s}'"
        ))
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<usize> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(bad)
        })
        .collect::<Result<_>>()?;
    Ok(PhiGrid {
        times: v[0],
        positions: v[1],
        widths: v[2],
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("PBAL_THREADS") {
        Ok(v) => v.parse::<usize>().ok().filter(|&k| k > 0).ok_or_else(|| {
            Error::Config(format!(
                "PBAL_THREADS must be a positive integer, got '{v}'"
            ))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Integrates `s` from its quantile initialisation with `n` particles.
pub fn simulate(s: &Scenario, n: usize, cfg: &SolverConfig) -> Result<Trajectory> {
    let rho0 = s
        .initial
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario '{}' has no initial density", s.name)))?;
    integrate(&quantile_init(rho0, n)?, s, cfg)
}

/// `|a - b|_{L1([0,T] x R)}`: trapezoid in time of the exact spatial distance.
pub fn spacetime_l1(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.snapshots.len() != b.snapshots.len()
        || a.snapshots
            .iter()
            .zip(&b.snapshots)
            .any(|(p, q)| (p.t - q.t).abs() > 1e-12 * (1.0 + p.t.abs()))
    {
        return Err(Error::Domain(
            "trajectories do not share snapshot times".into(),
        ));
    }
    let ts = a.times();
    let ds = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(p, q)| Ok(l1_distance(&to_density(p)?, &to_density(q)?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(&ts, &ds))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_coarse: usize,
    pub n_fine: usize,
    pub distance: f64,
    /// `distance(previous row) / distance`, absent on the first row.
    pub reduction: Option<f64>,
}

/// Distances between consecutive members of `ns`; members run concurrently.
pub fn sweep_table(s: &Scenario, ns: &[usize], cfg: &SolverConfig) -> Result<Vec<SweepRow>> {
    if ns.len() < 2 {
        return Err(Error::Config(
            "a sweep needs at least two particle counts".into(),
        ));
    }
    let runs = ns
        .par_iter()
        .map(|&n| simulate(s, n, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(ns.len() - 1);
    for k in 0..ns.len() - 1 {
        let distance = spacetime_l1(&runs[k], &runs[k + 1])?;
        let reduction = rows.last().map(|r| r.distance / distance);
        rows.push(SweepRow {
            n_coarse: ns[k],
            n_fine: ns[k + 1],
            distance,
            reduction,
        });
    }
    Ok(rows)
}

pub fn cmd_catalog() -> i32 {
    for name in CATALOG {
        let s = builtin_catalog(name).expect("catalog entries build");
        println!("{name:<22} {}", s.description);
    }
    EXIT_OK
}

fn report<T>(r: Result<T>) -> std::result::Result<T, i32> {
    r.map_err(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

fn require_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("--n must be at least 1".into()));
    }
    Ok(())
}

fn run_inner(a: &RunArgs) -> Result<RunManifest> {
    require_n(a.n)?;
    let cfg = a.solver.config()?;
    let s = resolve_scenario(&a.solver.scenario)?;
    let start = Instant::now();
    let traj = simulate(&s, a.n, &cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let csv = a.out.join("snapshots.csv");
    write_snapshots_csv(&traj, &csv)?;
    let mut outputs = vec![OutputFile::hashed(&csv)?];
    if a.svg {
        let svg = a.out.join("density.svg");
        write_text(&svg, &density_svg(&traj, &s.name)?)?;
        outputs.push(OutputFile::hashed(&svg)?);
    }
    let manifest = RunManifest {
        scenario: s.name.clone(),
        scenario_sha256: s.fingerprint.clone(),
        n: a.n,
        config: cfg,
        stats: traj.stats,
        outputs,
        wall_clock_seconds: wall,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&manifest, &a.out.join("manifest.json"))?;
    let (q0, q1) = (traj.snapshots[0].total_mass(), traj.last().total_mass());
    println!(
        "{}: N = {}, {} snapshots, {} accepted steps, mass {q0} -> {q1}",
        s.name,
        a.n,
        traj.snapshots.len(),
        traj.stats.accepted
    );
    Ok(manifest)
}

pub fn cmd_run(a: &RunArgs) -> i32 {
    match report(run_inner(a)) {
        Ok(_) => EXIT_OK,
        Err(code) => code,
    }
}

fn sweep_inner(a: &SweepArgs) -> Result<Vec<SweepRow>> {
    for &n in &a.n {
        require_n(n)?;
    }
    let cfg = a.solver.config()?;
    let s = resolve_scenario(&a.solver.scenario)?;
    let rows = thread_pool()?.install(|| sweep_table(&s, &a.n, &cfg))?;
    println!(
        "{:>8} {:>8} {:>14} {:>10}",
        "N", "2N", "L1 distance", "reduction"
    );
    for r in &rows {
        let red = r.reduction.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!(
            "{:>8} {:>8} {:>14.6e} {:>10}",
            r.n_coarse, r.n_fine, r.distance, red
        );
    }
    if let Some(out) = &a.out {
        write_json(&rows, &out.join("sweep.json"))?;
    }
    Ok(rows)
}

pub fn cmd_sweep(a: &SweepArgs) -> i32 {
    match report(sweep_inner(a)) {
        Ok(_) => EXIT_OK,
        Err(code) => code,
    }
}

fn audit_inner(a: &AuditArgs) -> Result<DiagnosticsReport> {
    require_n(a.n)?;
    let grid = parse_phi_grid(&a.phi_grid)?;
    if a.c_grid.is_empty() || a.c_grid.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(Error::Config(
            "--c-grid needs non-negative fractions".into(),
        ));
    }
    let cfg = a.solver.config_with_default(AUDIT_SNAPSHOTS)?;
    let s = resolve_scenario(&a.solver.scenario)?;
    let rho0 = s
        .initial
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario '{}' has no initial density", s.name)))?;
    let p0 = quantile_init(rho0, a.n)?;
    let r0 = to_density(&p0)?.max_height();
    let levels: Vec<f64> = a.c_grid.iter().map(|c| c * r0).collect();
    let (traj, good_v, steps_checked) = integrate_audited(&p0, &s, &cfg, &levels)?;
    let env = envelopes(
        &s,
        &EnvelopeInputs::from_state(&p0)?,
        cfg.t_end,
        &traj.times(),
    );
    let bounds = check_bounds(&traj, &env, 100.0 * cfg.rel_tol)?;
    let entropy =
        thread_pool()?.install(|| default_entropy_residual(&traj, &s, grid, &a.c_grid))?;
    let h = traj.snapshots[1].t - traj.snapshots[0].t;
    let equicontinuity = equicontinuity_modulus(&traj, h)?;
    let rep = DiagnosticsReport {
        scenario: s.name.clone(),
        n: a.n,
        envelopes: env,
        bounds,
        good_v,
        steps_checked,
        entropy,
        equicontinuity,
    };
    write_json(&rep, &a.out.join("audit.json"))?;
    write_envelope_csv(&traj, &rep.envelopes, &a.out.join("envelopes.csv"))?;
    let mass: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|p| (p.t, p.total_mass() / p0.total_mass()))
        .collect();
    write_text(
        &a.out.join("mass.svg"),
        &envelope_svg("mass / initial mass", &mass, &rep.envelopes.q),
    )?;
    let maxr = rep
        .bounds
        .snapshots
        .iter()
        .map(|b| (b.t, b.max_density))
        .collect::<Vec<_>>();
    write_text(
        &a.out.join("density_bound.svg"),
        &envelope_svg("max density", &maxr, &rep.envelopes.r),
    )?;
    let k = rep
        .equicontinuity
        .iter()
        .map(|p| p.total / h)
        .fold(0.0, f64::max);
    println!("{}: N = {}", s.name, a.n);
    println!(
        "  bounds          {}",
        if rep.bounds.all_ok { "ok" } else { "VIOLATED" }
    );
    println!(
        "  structural      {} violations over {} states",
        rep.good_v.len(),
        rep.steps_checked
    );
    println!("  entropy res-    {:.3e}", rep.entropy.res_minus);
    println!("  modulus / h     {k:.4}");
    Ok(rep)
}

pub fn cmd_audit(a: &AuditArgs) -> i32 {
    match report(audit_inner(a)) {
        Ok(rep) if rep.good_v.is_empty() && rep.bounds.all_ok => EXIT_OK,
        Ok(_) => EXIT_VIOLATION,
        Err(code) => code,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub t: f64,
    pub l1: f64,
    pub relative: f64,
}

fn validate_inner(a: &ValidateArgs) -> Result<Vec<ValidationRow>> {
    require_n(a.n)?;
    let cfg = a.solver.config()?;
    let s = resolve_scenario(&a.solver.scenario)?;
    let traj = simulate(&s, a.n, &cfg)?;
    let mut fv = FvConfig::new(a.j, cfg.t_end);
    fv.flux = a.flux.into();
    fv.half_width = a.half_width;
    fv.snapshot_times = cfg.snapshot_times.clone();
    let grid = fv_run(s.initial.as_ref().expect("simulated above"), &s, &fv)?;
    let mass = traj.snapshots[0].total_mass();
    let rows: Vec<ValidationRow> = compare_l1(&traj, &grid)?
        .into_iter()
        .map(|(t, l1)| ValidationRow {
            t,
            l1,
            relative: l1 / mass,
        })
        .collect();
    println!("{:>10} {:>14} {:>12}", "t", "L1", "L1 / mass");
    for r in &rows {
        println!("{:>10.4} {:>14.6e} {:>12.4e}", r.t, r.l1, r.relative);
    }
    if let Some(out) = &a.out {
        write_json(&rows, &out.join("validate.json"))?;
        write_grid_csv(&grid, &out.join("grid.csv"))?;
        write_snapshots_csv(&traj, &out.join("snapshots.csv"))?;
    }
    Ok(rows)
}

pub fn cmd_validate(a: &ValidateArgs) -> i32 {
    match report(validate_inner(a)) {
        Ok(_) => EXIT_OK,
        Err(code) => code,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match &cli.command {
        Command::Catalog => cmd_catalog(),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Validate(a) => cmd_validate(a),
    }
}
