//! First-order finite-volume solver on a fixed uniform grid, used as an
//! independent cross-check of the particle scheme.

use serde::{Deserialize, Serialize};

use crate::density::{l1_distance, to_density, PiecewiseDensity};
use crate::diagnostics::envelope_s;
use crate::dynamics::{density_jumps, Interaction};
use crate::error::{Error, Result};
use crate::init::InitialDensity;
use crate::integrator::{equispaced, Trajectory};
use crate::scenario::Scenario;

pub const CFL: f64 = 0.45;

/// Relative mass (per cell) above which a boundary cell counts as occupied.
const BOUNDARY_MASS_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flux {
    /// `U+ rho_j v(rho_{j+1}) + U- rho_{j+1} v(rho_j)`.
    #[default]
    MirroredUpwind,
    /// Local Lax-Friedrichs on `rho v(rho) U`.
    Rusanov,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridState {
    pub t: f64,
    pub x_left: f64,
    pub dx: f64,
    /// Cell averages.
    pub cells: Vec<f64>,
}

impl GridState {
    /// Cell averages of `rho0` on `cells` cells covering `[-half_width, half_width]`.
    pub fn from_initial(rho0: &InitialDensity, half_width: f64, cells: usize) -> Result<Self> {
        if cells < 3 || !(half_width > 0.0) {
            return Err(Error::Config(format!(
                "grid needs at least 3 cells and a positive extent, got {cells} cells on half-width {half_width}"
            )));
        }
        let dx = 2.0 * half_width / cells as f64;
        let x_left = -half_width;
        let mut prev = rho0.cdf(x_left);
        let cells = (0..cells)
            .map(|j| {
                let next = rho0.cdf(x_left + (j + 1) as f64 * dx);
                let avg = (next - prev) / dx;
                prev = next;
                avg.max(0.0)
            })
            .collect();
        Ok(GridState {
            t: 0.0,
            x_left,
            dx,
            cells,
        })
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.cells.len())
            .map(|j| self.x_left + j as f64 * self.dx)
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().sum::<f64>() * self.dx
    }

    pub fn to_density(&self) -> Result<PiecewiseDensity> {
        PiecewiseDensity::new(self.edges(), self.cells.clone())
    }

    /// Velocity field `U` at every cell edge.
    pub fn interface_velocity(&self, s: &Scenario) -> Vec<f64> {
        let edges = self.edges();
        let mut padded = Vec::with_capacity(self.cells.len() + 2);
        padded.push(0.0);
        padded.extend_from_slice(&self.cells);
        padded.push(0.0);
        let d = density_jumps(&padded);
        let inter = Interaction::new(&s.potential, &edges, &d);
        edges
            .iter()
            .map(|&e| (s.advection.velocity)(self.t, e) - inter.w_sum(e))
            .collect()
    }

    /// Largest stable step, `CFL dx / (max|U| (|v|_inf + R |v'|_inf))`.
    pub fn max_stable_dt(&self, s: &Scenario, u: &[f64]) -> f64 {
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rmax = self.cells.iter().fold(0.0f64, |m, &v| m.max(v));
        let speed = umax * (s.congestion.v_sup + rmax * (s.congestion.vprime_bound)(rmax));
        if speed > 0.0 {
            CFL * self.dx / speed
        } else {
            f64::INFINITY
        }
    }
}

fn fluxes(g: &GridState, s: &Scenario, u: &[f64], flux: Flux) -> Vec<f64> {
    let j = g.cells.len();
    let mut out = vec![0.0; j + 1];
    let v = |r: f64| s.v(r);
    let c = &s.congestion;
    for k in 1..j {
        let (rl, rr) = (g.cells[k - 1], g.cells[k]);
        out[k] = match flux {
            Flux::MirroredUpwind => u[k].max(0.0) * rl * v(rr) + u[k].min(0.0) * rr * v(rl),
            Flux::Rusanov => {
                let r = rl.max(rr);
                let a = u[k].abs() * (c.v_sup + r * (c.vprime_bound)(r));
                0.5 * u[k] * (rl * v(rl) + rr * v(rr)) - 0.5 * a * (rr - rl)
            }
        };
    }
    out
}

/// One forward-Euler step of size `dt`.
pub fn fv_step(g: &GridState, s: &Scenario, dt: f64, flux: Flux) -> Result<GridState> {
    let u = g.interface_velocity(s);
    let required = g.max_stable_dt(s, &u);
    if dt > required * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, required });
    }
    let fl = fluxes(g, s, &u, flux);
    let ratio = dt / g.dx;
    let cells = g
        .cells
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let src = if s.source.is_zero {
                0.0
            } else {
                (s.source.f)(g.t, g.x_left + (k as f64 + 0.5) * g.dx, r)
            };
            r - ratio * (fl[k + 1] - fl[k]) + dt * src
        })
        .collect();
    Ok(GridState {
        t: g.t + dt,
        x_left: g.x_left,
        dx: g.dx,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvConfig {
    pub cells: usize,
    pub flux: Flux,
    /// Grid covers `[-half_width, half_width]`; defaults to 1.1 `S(t_end)`.
    pub half_width: Option<f64>,
    pub snapshot_times: Vec<f64>,
}

impl FvConfig {
    pub fn new(cells: usize, t_end: f64) -> Self {
        FvConfig {
            cells,
            flux: Flux::MirroredUpwind,
            half_width: None,
            snapshot_times: equispaced(t_end, 11),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridTrajectory {
    pub snapshots: Vec<GridState>,
    pub steps: usize,
}

/// Support radius the grid must cover up to `t_end`.
pub fn required_half_width(rho0: &InitialDensity, s: &Scenario, t_end: f64) -> f64 {
    let (a, b) = rho0.support();
    let sc = envelope_s(s, rho0.total_mass(), a.abs().max(b.abs()), &[0.0, t_end]);
    sc.values.last().copied().unwrap_or(f64::INFINITY)
}

pub fn fv_run(rho0: &InitialDensity, s: &Scenario, cfg: &FvConfig) -> Result<GridTrajectory> {
    let times = &cfg.snapshot_times;
    if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "snapshot times must start at 0 and increase".into(),
        ));
    }
    let t_end = times[times.len() - 1];
    let need = required_half_width(rho0, s, t_end);
    if !need.is_finite() {
        return Err(Error::Domain(format!(
            "support envelope blows up before t = {t_end}; no finite grid covers it"
        )));
    }
    let half_width = match cfg.half_width {
        Some(h) if h < need => {
            return Err(Error::Domain(format!(
                "grid half-width {h} is smaller than the required support extent {need}"
            )))
        }
        Some(h) => h,
        None => 1.1 * need,
    };
    let mut g = GridState::from_initial(rho0, half_width, cfg.cells)?;
    let mass0 = g.total_mass();
    let mut snapshots = vec![g.clone()];
    let mut steps = 0;
    for &target in &times[1..] {
        while g.t < target {
            let u = g.interface_velocity(s);
            let stable = g.max_stable_dt(s, &u);
            let remaining = target - g.t;
            let dt = stable.min(remaining);
            let mut next = fv_step(&g, s, dt, cfg.flux)?;
            if stable >= remaining {
                next.t = target;
            }
            g = next;
            steps += 1;
            let edge = g.cells[0].max(g.cells[g.cells.len() - 1]) * g.dx;
            if edge > BOUNDARY_MASS_REL * mass0.max(f64::MIN_POSITIVE) {
                return Err(Error::Domain(format!(
                    "support reached the grid boundary at t = {} (half-width {half_width})",
                    g.t
                )));
            }
        }
        snapshots.push(g.clone());
    }
    Ok(GridTrajectory { snapshots, steps })
}

/// Exact `L1` distance between particle and grid densities at every shared
/// snapshot time.
pub fn compare_l1(traj: &Trajectory, grid: &GridTrajectory) -> Result<Vec<(f64, f64)>> {
    if traj.snapshots.len() != grid.snapshots.len() {
        return Err(Error::Domain(format!(
            "{} particle snapshots vs {} grid snapshots",
            traj.snapshots.len(),
            grid.snapshots.len()
        )));
    }
    traj.snapshots
        .iter()
        .zip(&grid.snapshots)
        .map(|(p, g)| {
            if (p.t - g.t).abs() > 1e-9 * (1.0 + p.t.abs()) {
                return Err(Error::Domain(format!(
                    "snapshot times differ: {} vs {}",
                    p.t, g.t
                )));
            }
            Ok((p.t, l1_distance(&to_density(p)?, &g.to_density()?)))
        })
        .collect()
}
