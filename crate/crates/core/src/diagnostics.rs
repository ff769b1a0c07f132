//! A-priori envelopes, bound checks, entropy residuals, the equicontinuity
//! modulus and the audit of the structural congestion inequalities.

use serde::Serialize;

use crate::density::{
    l1_distance, pushforward_affine, to_density, total_variation, w1_distance, ParticleSystem,
};
use crate::dynamics::{density_jumps, good_v_violations, rhs, GoodVViolation, Interaction};
use crate::error::{Error, Result};
use crate::expr::{bump, bump_prime};
use crate::integrator::{integrate_observed, solve_envelope_ode, SolverConfig, Trajectory};
use crate::quadrature::{adaptive_simpson, gauss8_nodes, trapezoid};
use crate::scenario::{NoCollapseBranch, Scenario};

/// `Q(t) = exp(c_f int_0^t F)`.
pub fn envelope_q(s: &Scenario, t: f64) -> f64 {
    if s.source.c_f == 0.0 || t <= 0.0 {
        return 1.0;
    }
    let f = |tau: f64| s.growth_f(tau);
    (s.source.c_f * adaptive_simpson(0.0, t, 1e-10, &f)).exp()
}

/// Sampled non-decreasing curve; `+inf` after a blow-up.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub blow_up: Option<f64>,
}

impl Curve {
    /// Value at the first sample time `>= t` (an upper bound for a
    /// non-decreasing curve); `+inf` beyond the last sample.
    pub fn eval(&self, t: f64) -> f64 {
        let tol = 1e-12 * (1.0 + t.abs());
        let k = self.times.partition_point(|&s| s < t - tol);
        self.values.get(k).copied().unwrap_or(f64::INFINITY)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.values
            .windows(2)
            .all(|w| w[1] >= w[0] || w[1].is_nan())
    }
}

/// Initial data entering the envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeInputs {
    /// Initial total mass `q(0)`.
    pub q0: f64,
    /// Initial support radius, `[x_0, x_N] ⊆ [-S0, S0]`.
    pub s0: f64,
    /// Initial sup of the density.
    pub r0: f64,
    /// Initial total variation.
    pub b0: f64,
}

impl EnvelopeInputs {
    pub fn from_state(p: &ParticleSystem) -> Result<Self> {
        let d = to_density(p)?;
        Ok(EnvelopeInputs {
            q0: p.total_mass(),
            s0: p.x[0].abs().max(p.x[p.x.len() - 1].abs()),
            r0: d.max_height(),
            b0: total_variation(&d),
        })
    }
}

/// Envelopes of mass growth `Q`, support `S`, density `R` and, when the
/// scenario supplies `eta_mass`, total variation `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeCurves {
    pub q: Curve,
    pub s: Curve,
    pub r: Curve,
    pub b: Option<Curve>,
}

const ENVELOPE_TOL: f64 = 1e-8;

/// Integrates the envelope system `(int F, S, R[, B])` jointly.
fn envelope_system(
    s: &Scenario,
    inp: &EnvelopeInputs,
    times: &[f64],
    with_b: bool,
) -> (Vec<f64>, Vec<Vec<f64>>, Option<f64>) {
    let c = &s.congestion;
    let cf = s.source.c_f;
    let q0 = inp.q0;
    let branch = s.no_collapse_branch;
    let eta = if with_b {
        s.source.eta_mass.clone()
    } else {
        None
    };
    let rhs = |t: f64, y: &[f64]| -> Vec<f64> {
        let f = s.growth_f(t);
        let q = (cf * y[0]).exp();
        let (sr, r) = (y[1].max(0.0), y[2].max(0.0));
        let lambda = (s.advection.growth_lambda)(sr);
        let (g_s, g_2s) = (s.growth_g(sr), s.growth_g(2.0 * sr));
        let c1 = f * (g_s + g_2s * q0 * q);
        let c2 = f;
        let ds = c.v_sup * f * (1.0 + q0 * q) * lambda;
        let dr = match branch {
            NoCollapseBranch::VDecays => {
                let g = c.decay_g.as_ref().map_or(f64::INFINITY, |g| g(r));
                (c1 * c.v_sup + c2 + cf * f) * g
            }
            NoCollapseBranch::WRepulsive => (c1 * c.v_sup + cf * f) * r,
        };
        let mut out = vec![f, ds, dr];
        if let Some(eta) = &eta {
            let b = y[3];
            let v = c.v_sup;
            let inner = g_s + g_2s * q0 * q;
            let alpha = v * r * f * inner
                + 2.0 * v * r * f * g_2s * (q0 * q + 2.0 * r * sr)
                + v * r * f * (inner + r)
                + 2.0 * cf * f * r
                + 2.0 * eta(t, r, sr);
            let beta = 2.0 * v * r * f * g_2s
                + (v + r * (c.vprime_bound)(r)) * f * (inner + r)
                + f * (s.source.drho_f_bound)(r);
            out.push(alpha + beta * b);
        }
        out
    };
    let mut y0 = vec![0.0, inp.s0, inp.r0];
    if eta.is_some() {
        y0.push(inp.b0);
    }
    let sol = solve_envelope_ode(rhs, &y0, times, ENVELOPE_TOL, ENVELOPE_TOL);
    (sol.times, sol.values, sol.blow_up)
}

fn column(values: &[Vec<f64>], k: usize) -> Vec<f64> {
    values.iter().map(|v| v[k]).collect()
}

fn envelope_times(t_end: f64, extra: &[f64]) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=256).map(|k| t_end * k as f64 / 256.0).collect();
    times.extend(extra.iter().copied().filter(|t| *t >= 0.0 && *t <= t_end));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    times
}

/// Support envelope `S' = |v|_inf F (1 + q0 Q) lambda(S)`, `S(0) = s0`.
pub fn envelope_s(s: &Scenario, q0: f64, s0: f64, times: &[f64]) -> Curve {
    let inp = EnvelopeInputs {
        q0,
        s0,
        r0: 0.0,
        b0: 0.0,
    };
    let (times, values, blow_up) = envelope_system(s, &inp, times, false);
    Curve {
        times,
        values: column(&values, 1),
        blow_up,
    }
}

/// Density envelope for the scenario's no-collapse branch.
pub fn envelope_r(s: &Scenario, q0: f64, s0: f64, r0: f64, times: &[f64]) -> Curve {
    let inp = EnvelopeInputs {
        q0,
        s0,
        r0,
        b0: 0.0,
    };
    let (times, values, blow_up) = envelope_system(s, &inp, times, false);
    Curve {
        times,
        values: column(&values, 2),
        blow_up,
    }
}

/// All envelopes on a grid of 257 equispaced times plus `extra` times.
pub fn envelopes(s: &Scenario, inp: &EnvelopeInputs, t_end: f64, extra: &[f64]) -> EnvelopeCurves {
    let times = envelope_times(t_end, extra);
    let with_b = s.source.eta_mass.is_some();
    let (times, values, blow_up) = envelope_system(s, inp, &times, with_b);
    let curve = |k: usize| Curve {
        times: times.clone(),
        values: column(&values, k),
        blow_up,
    };
    EnvelopeCurves {
        q: Curve {
            values: times.iter().map(|&t| envelope_q(s, t)).collect(),
            times: times.clone(),
            blow_up: None,
        },
        s: curve(1),
        r: curve(2),
        b: with_b.then(|| curve(3)),
    }
}

/// `max_i (|U_i - U_{i-1}| / (x_i - x_{i-1}) - (C_1 + C_2 rho_i))` with the
/// constants evaluated on the current support and mass; non-positive when
/// the first-difference estimate holds.
pub fn first_difference_excess(p: &ParticleSystem, s: &Scenario) -> Result<f64> {
    let ev = rhs(p, s)?;
    let f = s.growth_f(p.t);
    let radius = p.x[0].abs().max(p.x[p.x.len() - 1].abs());
    let c1 = f * (s.growth_g(radius) + s.growth_g(2.0 * radius) * p.total_mass());
    let c2 = f;
    let mut worst = f64::NEG_INFINITY;
    for i in 1..p.x.len() {
        let slope = (ev.u[i] - ev.u[i - 1]).abs() / (p.x[i] - p.x[i - 1]);
        worst = worst.max(slope - (c1 + c2 * ev.rho[i]));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotBounds {
    pub t: f64,
    pub mass: f64,
    pub mass_lower: f64,
    pub mass_upper: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub support_bound: f64,
    pub max_density: f64,
    pub density_bound: f64,
    pub total_variation: f64,
    pub tv_bound: Option<f64>,
    /// Smallest relative slack over all checked bounds (negative = violated).
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub snapshots: Vec<SnapshotBounds>,
    pub max_total_variation: f64,
    pub all_ok: bool,
}

/// Checks every snapshot against the envelopes. `slack` is a relative
/// tolerance absorbing integration error.
pub fn check_bounds(traj: &Trajectory, env: &EnvelopeCurves, slack: f64) -> Result<BoundsReport> {
    let q0 = traj.snapshots[0].total_mass();
    let mut out = Vec::with_capacity(traj.snapshots.len());
    let mut max_tv: f64 = 0.0;
    for p in &traj.snapshots {
        let d = to_density(p)?;
        let q = env.q.eval(p.t);
        let mass = p.total_mass();
        let (lo, hi) = (q0 / q, q0 * q);
        let sb = env.s.eval(p.t);
        let rb = env.r.eval(p.t);
        let tv = total_variation(&d);
        max_tv = max_tv.max(tv);
        let tvb = env.b.as_ref().map(|b| b.eval(p.t));
        let rel = |bound: f64, value: f64| -> f64 {
            if bound.is_infinite() {
                f64::INFINITY
            } else {
                (bound - value) / bound.abs().max(f64::MIN_POSITIVE)
            }
        };
        let (xl, xr) = (p.x[0], p.x[p.x.len() - 1]);
        let mut margin = rel(hi, mass)
            .min((mass - lo) / lo)
            .min(rel(sb, xr))
            .min(rel(sb, -xl))
            .min(rel(rb, d.max_height()));
        if let Some(b) = tvb {
            margin = margin.min(rel(b, tv));
        }
        out.push(SnapshotBounds {
            t: p.t,
            mass,
            mass_lower: lo,
            mass_upper: hi,
            x_left: xl,
            x_right: xr,
            support_bound: sb,
            max_density: d.max_height(),
            density_bound: rb,
            total_variation: tv,
            tv_bound: tvb,
            margin,
            ok: margin >= -slack,
        });
    }
    Ok(BoundsReport {
        all_ok: out.iter().all(|s| s.ok),
        max_total_variation: max_tv,
        snapshots: out,
    })
}

/// Tensor bump `b((t - t0)/tau) b((x - x0)/ell)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub t0: f64,
    pub tau: f64,
    pub x0: f64,
    pub ell: f64,
}

/// `max |b'|` for the bump profile.
const BUMP_PRIME_MAX: f64 = 2.1704;

impl TestFunction {
    pub fn value(&self, t: f64, x: f64) -> f64 {
        bump((t - self.t0) / self.tau) * bump((x - self.x0) / self.ell)
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        bump_prime((t - self.t0) / self.tau) / self.tau * bump((x - self.x0) / self.ell)
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        bump((t - self.t0) / self.tau) * bump_prime((x - self.x0) / self.ell) / self.ell
    }

    /// Upper bound for `max(|d/dt phi|, |d/dx phi|)`.
    pub fn gradient_bound(&self) -> f64 {
        BUMP_PRIME_MAX * (1.0 / self.tau).max(1.0 / self.ell)
    }
}

/// Shape of the default test-function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhiGrid {
    pub times: usize,
    pub positions: usize,
    pub widths: usize,
}

impl Default for PhiGrid {
    fn default() -> Self {
        PhiGrid {
            times: 3,
            positions: 5,
            widths: 2,
        }
    }
}

/// Default `c` levels as fractions of the empirical maximal density.
pub const DEFAULT_C_FRACTIONS: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.1];

/// Convex hull of the particle positions over all snapshots.
pub fn trajectory_hull(traj: &Trajectory) -> (f64, f64) {
    traj.snapshots
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.x[0]), b.max(p.x[p.x.len() - 1]))
        })
}

/// Empirical `max rho_i` over all snapshots.
pub fn max_density(traj: &Trajectory) -> Result<f64> {
    traj.snapshots
        .iter()
        .try_fold(0.0f64, |m, p| Ok(m.max(to_density(p)?.max_height())))
}

/// Time centers at `k/(n+1)` of the span, space centers at the midpoints of
/// `positions` equal parts of the hull, widths `(T/4, H/4) / 2^w`.
pub fn default_test_functions(traj: &Trajectory, grid: PhiGrid) -> Vec<TestFunction> {
    let t_first = traj.snapshots[0].t;
    let span = traj.last().t - t_first;
    let (a, b) = trajectory_hull(traj);
    let hull = b - a;
    let mut out = Vec::new();
    for w in 0..grid.widths {
        let scale = 0.25 / (1u64 << w) as f64;
        for kt in 0..grid.times {
            for kx in 0..grid.positions {
                out.push(TestFunction {
                    t0: t_first + span * (kt + 1) as f64 / (grid.times + 1) as f64,
                    tau: span * scale,
                    x0: a + hull * (kx as f64 + 0.5) / grid.positions as f64,
                    ell: hull * scale,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEntry {
    pub phi: usize,
    pub c: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyResidualReport {
    pub test_functions: Vec<TestFunction>,
    pub c_levels: Vec<f64>,
    /// One entry per `(phi, c)`, `phi`-major.
    pub entries: Vec<EntropyEntry>,
    /// `max(0, -min E)`.
    pub res_minus: f64,
    pub snapshots_used: usize,
}

struct Node {
    x: f64,
    w: f64,
    rho: f64,
    u: f64,
    dxu: f64,
    f: f64,
}

/// Quadrature nodes on `[lo, hi]`: order-8 Gauss per cell and on panels of
/// width at most `panel` in the vacuum parts.
fn snapshot_nodes(
    p: &ParticleSystem,
    s: &Scenario,
    lo: f64,
    hi: f64,
    panel: f64,
) -> Result<Vec<Node>> {
    let rho = p.densities_extended()?;
    let d = density_jumps(&rho);
    let inter = Interaction::new(&s.potential, &p.x, &d);
    let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
    let vacuum = |a: f64, b: f64, pieces: &mut Vec<(f64, f64, f64)>| {
        if b > a {
            let m = ((b - a) / panel).ceil().max(1.0) as usize;
            for k in 0..m {
                let pa = a + (b - a) * k as f64 / m as f64;
                let pb = if k + 1 == m {
                    b
                } else {
                    a + (b - a) * (k + 1) as f64 / m as f64
                };
                pieces.push((pa, pb, 0.0));
            }
        }
    };
    let (x0, xn) = (p.x[0], p.x[p.x.len() - 1]);
    vacuum(lo, x0.min(hi), &mut pieces);
    for i in 1..p.x.len() {
        if p.x[i] > lo && p.x[i - 1] < hi {
            pieces.push((p.x[i - 1], p.x[i], rho[i]));
        }
    }
    vacuum(xn.max(lo), hi, &mut pieces);
    let mut nodes = Vec::with_capacity(8 * pieces.len());
    for (a, b, r) in pieces {
        for (x, w) in gauss8_nodes(a, b) {
            let f = if s.source.is_zero || r == 0.0 {
                0.0
            } else {
                (s.source.f)(p.t, x, r)
            };
            nodes.push(Node {
                x,
                w,
                rho: r,
                u: (s.advection.velocity)(p.t, x) - inter.w_sum(x),
                dxu: (s.advection.dx_velocity)(p.t, x) - inter.dxw_sum(x, true),
                f,
            });
        }
    }
    Ok(nodes)
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Discrete entropy residuals `E(phi, c)`: space integrals by order-8 Gauss
/// per cell (and per vacuum panel), time integral by the trapezoid rule
/// over the snapshots.
pub fn entropy_residual(
    traj: &Trajectory,
    s: &Scenario,
    phis: &[TestFunction],
    cs: &[f64],
) -> Result<EntropyResidualReport> {
    let snaps = &traj.snapshots;
    if snaps.len() < 2 {
        return Err(Error::Domain(
            "entropy residual needs at least two snapshots".into(),
        ));
    }
    let (t_first, t_last) = (snaps[0].t, snaps[snaps.len() - 1].t);
    let tol = 1e-12 * (1.0 + t_last.abs());
    for (k, phi) in phis.iter().enumerate() {
        if phi.t0 - phi.tau < t_first - tol || phi.t0 + phi.tau > t_last + tol {
            return Err(Error::Domain(format!(
                "test function {k} has time support [{}, {}] outside the snapshots [{t_first}, {t_last}]",
                phi.t0 - phi.tau,
                phi.t0 + phi.tau
            )));
        }
        if !(phi.tau > 0.0 && phi.ell > 0.0) {
            return Err(Error::Domain(format!(
                "test function {k} has non-positive width"
            )));
        }
    }
    let lo = phis
        .iter()
        .map(|p| p.x0 - p.ell)
        .fold(f64::INFINITY, f64::min);
    let hi = phis
        .iter()
        .map(|p| p.x0 + p.ell)
        .fold(f64::NEG_INFINITY, f64::max);
    let panel = (hi - lo) / 512.0;
    let m = |r: f64| r * s.v(r);
    let mc: Vec<f64> = cs.iter().map(|&c| m(c)).collect();

    let nc = cs.len();
    let mut series = vec![vec![0.0; snaps.len()]; phis.len() * nc];
    let ts: Vec<f64> = snaps.iter().map(|p| p.t).collect();
    for (j, p) in snaps.iter().enumerate() {
        let active: Vec<usize> = (0..phis.len())
            .filter(|&k| ((p.t - phis[k].t0) / phis[k].tau).abs() < 1.0)
            .collect();
        if active.is_empty() {
            continue;
        }
        let nodes = snapshot_nodes(p, s, lo, hi, panel)?;
        for &k in &active {
            let phi = &phis[k];
            let st = (p.t - phi.t0) / phi.tau;
            let (bt, dbt) = (bump(st), bump_prime(st) / phi.tau);
            let start = nodes.partition_point(|n| n.x <= phi.x0 - phi.ell);
            let mut acc = vec![0.0; nc];
            for n in nodes[start..].iter().take_while(|n| n.x < phi.x0 + phi.ell) {
                let sx = (n.x - phi.x0) / phi.ell;
                let (bx, dbx) = (bump(sx), bump_prime(sx) / phi.ell);
                let (val, dtv, dxv) = (bt * bx, dbt * bx, bt * dbx);
                let mr = m(n.rho);
                for (ci, &c) in cs.iter().enumerate() {
                    let sg = sgn(n.rho - c);
                    let integrand = (n.rho - c).abs() * dtv
                        + sg * ((mr - mc[ci]) * n.u * dxv - mc[ci] * n.dxu * val + n.f * val);
                    acc[ci] += n.w * integrand;
                }
            }
            for ci in 0..nc {
                series[k * nc + ci][j] = acc[ci];
            }
        }
    }
    let mut entries = Vec::with_capacity(series.len());
    for k in 0..phis.len() {
        for (ci, &c) in cs.iter().enumerate() {
            entries.push(EntropyEntry {
                phi: k,
                c,
                value: trapezoid(&ts, &series[k * nc + ci]),
            });
        }
    }
    let min = entries
        .iter()
        .map(|e| e.value)
        .fold(f64::INFINITY, f64::min);
    Ok(EntropyResidualReport {
        test_functions: phis.to_vec(),
        c_levels: cs.to_vec(),
        res_minus: (-min).max(0.0),
        entries,
        snapshots_used: snaps.len(),
    })
}

/// Residual report over the default family and `fractions * max density`.
pub fn default_entropy_residual(
    traj: &Trajectory,
    s: &Scenario,
    grid: PhiGrid,
    fractions: &[f64],
) -> Result<EntropyResidualReport> {
    let r = max_density(traj)?;
    let cs: Vec<f64> = fractions.iter().map(|f| f * r).collect();
    entropy_residual(traj, s, &default_test_functions(traj, grid), &cs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquicontinuityPoint {
    pub t: f64,
    /// `W1(rho(t), Xi # rho(t))`, the transport part.
    pub transport: f64,
    /// `|Xi # rho(t) - rho(t + h)|_1`, the mass-change part.
    pub mass_change: f64,
    pub total: f64,
}

/// Two-term bound of the time modulus between snapshots `h` apart; `h`
/// must be a whole multiple of the (uniform) snapshot spacing.
pub fn equicontinuity_modulus(traj: &Trajectory, h: f64) -> Result<Vec<EquicontinuityPoint>> {
    let snaps = &traj.snapshots;
    if snaps.len() < 2 {
        return Err(Error::Domain("need at least two snapshots".into()));
    }
    let dt = snaps[1].t - snaps[0].t;
    let uniform = snaps
        .windows(2)
        .all(|w| ((w[1].t - w[0].t) - dt).abs() <= 1e-9 * dt);
    let k = (h / dt).round();
    if !uniform || !(k >= 1.0) || (k * dt - h).abs() > 1e-9 * h.max(dt) {
        return Err(Error::Domain(format!(
            "h = {h} is not a multiple of the snapshot spacing {dt}"
        )));
    }
    let k = k as usize;
    let mut out = Vec::new();
    for j in 0..snaps.len().saturating_sub(k) {
        let (a, b) = (&snaps[j], &snaps[j + k]);
        let pushed = pushforward_affine(a, b)?;
        let transport = w1_distance(&to_density(a)?, &pushed)?;
        let mass_change = l1_distance(&pushed, &to_density(b)?);
        out.push(EquicontinuityPoint {
            t: a.t,
            transport,
            mass_change,
            total: transport + mass_change,
        });
    }
    Ok(out)
}

/// Structural inequalities on every snapshot.
pub fn good_v_audit(
    traj: &Trajectory,
    s: &Scenario,
    c_grid: &[f64],
) -> Result<Vec<GoodVViolation>> {
    let mut out = Vec::new();
    for p in &traj.snapshots {
        out.extend(good_v_violations(&rhs(p, s)?, s, c_grid));
    }
    Ok(out)
}

/// Integrates and checks the structural inequalities after every accepted step.
pub fn integrate_audited(
    p0: &ParticleSystem,
    s: &Scenario,
    cfg: &SolverConfig,
    c_grid: &[f64],
) -> Result<(Trajectory, Vec<GoodVViolation>, usize)> {
    let mut violations = Vec::new();
    let mut checked = 0;
    let traj = integrate_observed(p0, s, cfg, |_, ev| {
        checked += 1;
        violations.extend(good_v_violations(ev, s, c_grid));
    })?;
    Ok((traj, violations, checked))
}

/// Everything `audit` produces for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub n: usize,
    pub envelopes: EnvelopeCurves,
    pub bounds: BoundsReport,
    pub good_v: Vec<GoodVViolation>,
    pub steps_checked: usize,
    pub entropy: EntropyResidualReport,
    pub equicontinuity: Vec<EquicontinuityPoint>,
}
