//! Dormand-Prince 5(4) time stepping.
//!
//! The particle right-hand side is only piecewise smooth: the congestion
//! factor switches branch when some `U_i` changes sign. On top of the usual
//! error control a step is therefore halved while the sign pattern of `U`
//! differs between its endpoints, down to `switch_min_step`, after which it
//! is accepted as is.

use serde::Serialize;

use crate::density::ParticleSystem;
use crate::dynamics::{rhs, RhsEvaluation};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 5.0;
const MIN_SHRINK: f64 = 0.2;

struct Attempt<X> {
    y: Vec<f64>,
    /// Derivative at the new point (first stage of the next step).
    k_end: Vec<f64>,
    extra_end: X,
    err: f64,
}

/// Weighted RMS of the embedded error estimate.
fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / err.len().max(1) as f64).sqrt()
}

/// One Dormand-Prince attempt from `(t, y)` with first stage `k1`. `None` when
/// some stage could not be evaluated.
fn attempt<X>(
    f: &mut impl FnMut(f64, &[f64]) -> Option<(Vec<f64>, X)>,
    t: f64,
    y: &[f64],
    k1: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Option<Attempt<X>> {
    let m = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k1.to_vec());
    let mut stage = vec![0.0; m];
    let mut extra = None;
    for s in 1..7 {
        for j in 0..m {
            let mut acc = 0.0;
            for (r, kr) in k.iter().enumerate() {
                acc += A[s][r] * kr[j];
            }
            stage[j] = y[j] + h * acc;
        }
        let (ks, x) = f(t + C[s] * h, &stage)?;
        k.push(ks);
        extra = Some(x);
    }
    // the last stage point is the fifth-order solution
    let y_new = stage;
    let err: Vec<f64> = (0..m)
        .map(|j| h * (0..7).map(|s| E[s] * k[s][j]).sum::<f64>())
        .collect();
    let err = error_norm(&err, y, &y_new, rtol, atol);
    Some(Attempt {
        y: y_new,
        k_end: k.pop().expect("seven stages"),
        extra_end: extra.expect("seven stages"),
        err,
    })
}

fn growth_factor(err: f64) -> f64 {
    if err == 0.0 {
        MAX_GROWTH
    } else {
        (SAFETY * err.powf(-0.2)).clamp(MIN_SHRINK, MAX_GROWTH)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Floor for the halving triggered by sign changes of `U`.
    pub switch_min_step: f64,
    pub snapshot_times: Vec<f64>,
    /// Relative gap below which a candidate step is rejected.
    pub guard_gap: f64,
}

impl SolverConfig {
    /// Defaults: tolerances `1e-8`, `max_step = t_end / 10`, 11 equispaced snapshots.
    pub fn new(t_end: f64) -> Self {
        SolverConfig {
            t_end,
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            max_step: t_end / 10.0,
            min_step: 1e-12 * t_end,
            switch_min_step: 1e-5 * t_end,
            snapshot_times: equispaced(t_end, 11),
            guard_gap: 1e-12,
        }
    }

    pub fn with_snapshots(mut self, count: usize) -> Self {
        self.snapshot_times = equispaced(self.t_end, count);
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step) {
            return bad("need 0 < min_step < max_step");
        }
        if !(self.switch_min_step >= self.min_step) {
            return bad("switch_min_step must be at least min_step");
        }
        if !(self.guard_gap > 0.0 && self.guard_gap < 1.0) {
            return bad("guard_gap must lie in (0, 1)");
        }
        if self.snapshot_times.is_empty() {
            return bad("at least one snapshot time is required");
        }
        if self.snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("snapshot times must be strictly increasing");
        }
        if self.snapshot_times[0] < 0.0
            || self.snapshot_times[self.snapshot_times.len() - 1] > self.t_end
        {
            return bad("snapshot times must lie in [0, t_end]");
        }
        Ok(())
    }
}

/// `count` equispaced times from 0 to `t_end` inclusive.
pub fn equispaced(t_end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..count)
            .map(|k| {
                if k == count - 1 {
                    t_end
                } else {
                    t_end * k as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected_error: usize,
    pub rejected_guard: usize,
    pub rejected_switch: usize,
    /// Steps accepted at the switching floor with a sign change inside.
    pub switch_floor_accepts: usize,
    pub rhs_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<ParticleSystem>,
    pub stats: StepStats,
    pub config: SolverConfig,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|p| p.t).collect()
    }

    pub fn last(&self) -> &ParticleSystem {
        self.snapshots.last().expect("non-empty trajectory")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GuardReason {
    /// Particles `index - 1` and `index` crossed or came too close.
    Ordering { index: usize },
    /// Mass `q_index` (1-based) is not positive.
    Mass { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GuardVerdict {
    Accept,
    Reject(GuardReason),
}

/// Accepts `next` only if its gaps stay above `guard_gap (x_N - x_0)` and all
/// masses stay positive.
pub fn step_guard(
    prev: &ParticleSystem,
    next: &ParticleSystem,
    cfg: &SolverConfig,
) -> GuardVerdict {
    debug_assert_eq!(prev.n(), next.n());
    let x = &next.x;
    let width = x[x.len() - 1] - x[0];
    let threshold = cfg.guard_gap * width.abs();
    for i in 1..x.len() {
        let gap = x[i] - x[i - 1];
        if !(gap > 0.0 && gap >= threshold) {
            return GuardVerdict::Reject(GuardReason::Ordering { index: i });
        }
    }
    if let Some(i) = next.q.iter().position(|&q| !(q > 0.0)) {
        return GuardVerdict::Reject(GuardReason::Mass { index: i + 1 });
    }
    GuardVerdict::Accept
}

fn split_state(t: f64, y: &[f64], n: usize) -> ParticleSystem {
    ParticleSystem {
        t,
        x: y[..=n].to_vec(),
        q: y[n + 1..].to_vec(),
    }
}

fn derivative_of(ev: &RhsEvaluation) -> Vec<f64> {
    let mut k = ev.xdot.clone();
    k.extend_from_slice(&ev.qdot);
    k
}

/// Sign of `U` with values within `eps` of zero treated as undecided.
fn branch_flip(u0: &[f64], u1: &[f64]) -> bool {
    let scale = u0.iter().chain(u1).fold(0.0f64, |m, u| m.max(u.abs()));
    let eps = 1e-12 * scale;
    u0.iter()
        .zip(u1)
        .any(|(a, b)| (*a > eps && *b < -eps) || (*a < -eps && *b > eps))
}

pub fn integrate(p0: &ParticleSystem, s: &Scenario, cfg: &SolverConfig) -> Result<Trajectory> {
    integrate_observed(p0, s, cfg, |_, _| {})
}

/// [`integrate`] calling `observer` on the initial state and after every
/// accepted step, with the right-hand side evaluated at that state.
pub fn integrate_observed(
    p0: &ParticleSystem,
    s: &Scenario,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&ParticleSystem, &RhsEvaluation),
) -> Result<Trajectory> {
    cfg.validate()?;
    p0.validate()?;
    if cfg.snapshot_times[0] < p0.t {
        return Err(Error::Config(format!(
            "first snapshot {} precedes the initial time {}",
            cfg.snapshot_times[0], p0.t
        )));
    }
    let n = p0.n();
    let mut stats = StepStats::default();
    let mut f = |t: f64, y: &[f64]| -> Option<(Vec<f64>, RhsEvaluation)> {
        let ev = rhs(&split_state(t, y, n), s).ok()?;
        Some((derivative_of(&ev), ev))
    };

    let mut t = p0.t;
    let mut y: Vec<f64> = p0.x.iter().chain(&p0.q).copied().collect();
    let mut ev = rhs(p0, s)?;
    stats.rhs_evaluations += 1;
    let mut k1 = derivative_of(&ev);
    let mut state = p0.clone();
    observer(&state, &ev);

    let mut snapshots = Vec::with_capacity(cfg.snapshot_times.len());
    let mut h = (0.01 * (cfg.t_end - t)).min(cfg.max_step).max(cfg.min_step);

    for &target in &cfg.snapshot_times {
        while t < target {
            let mut h_try = h.min(cfg.max_step);
            let forced = t + h_try >= target - 1e-12 * h_try.max(target.abs());
            if forced {
                h_try = target - t;
            }
            let outcome = attempt(&mut f, t, &y, &k1, h_try, cfg.rel_tol, cfg.abs_tol);
            stats.rhs_evaluations += 6;
            let reject = |h_try: f64, why: String| -> Result<f64> {
                let next = 0.5 * h_try;
                if next < cfg.min_step {
                    Err(Error::StepUnderflow { t, reason: why })
                } else {
                    Ok(next)
                }
            };
            let Some(att) = outcome else {
                stats.rejected_guard += 1;
                h = reject(
                    h_try,
                    "stage state degenerate (particle collision or vanishing mass)".into(),
                )?;
                continue;
            };
            if att.err > 1.0 {
                stats.rejected_error += 1;
                let next = h_try * growth_factor(att.err);
                if next < cfg.min_step {
                    return Err(Error::StepUnderflow {
                        t,
                        reason: format!("error estimate {:.3e} with step {:.3e}", att.err, h_try),
                    });
                }
                h = next;
                continue;
            }
            let t_new = if forced { target } else { t + h_try };
            let candidate = split_state(t_new, &att.y, n);
            if let GuardVerdict::Reject(reason) = step_guard(&state, &candidate, cfg) {
                stats.rejected_guard += 1;
                let why = match reason {
                    GuardReason::Ordering { index } => {
                        format!("particles {} and {index} collide", index - 1)
                    }
                    GuardReason::Mass { index } => format!("mass q[{index}] vanishes"),
                };
                h = reject(h_try, why)?;
                continue;
            }
            if branch_flip(&ev.u, &att.extra_end.u) {
                if 0.5 * h_try >= cfg.switch_min_step {
                    stats.rejected_switch += 1;
                    h = 0.5 * h_try;
                    continue;
                }
                stats.switch_floor_accepts += 1;
            }
            stats.accepted += 1;
            t = t_new;
            y = att.y;
            k1 = att.k_end;
            ev = att.extra_end;
            ev.t = t;
            state = candidate;
            observer(&state, &ev);
            // keep the controller's proposal unless the step was cut for the snapshot
            h = (h_try * growth_factor(att.err)).max(if forced { h } else { 0.0 });
        }
        snapshots.push(state.clone());
    }

    Ok(Trajectory {
        snapshots,
        stats,
        config: cfg.clone(),
    })
}

/// Result of [`solve_envelope_ode`]: values at the requested times, with
/// `+inf` from the blow-up time on.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub blow_up: Option<f64>,
}

/// Integrates `y' = f(t, y)` from `(times[0], y0)` through the sorted
/// `times` with the same Dormand-Prince machinery. Blow-up (non-finite or
/// astronomically large values, or step underflow) marks the remaining
/// values infinite.
pub fn solve_envelope_ode(
    mut f: impl FnMut(f64, &[f64]) -> Vec<f64>,
    y0: &[f64],
    times: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> OdeSolution {
    const HUGE: f64 = 1e150;
    let mut g = |t: f64, y: &[f64]| -> Option<(Vec<f64>, ())> {
        let d = f(t, y);
        d.iter().all(|v| v.is_finite()).then_some((d, ()))
    };
    let m = y0.len();
    let span = times[times.len() - 1] - times[0];
    let mut values = Vec::with_capacity(times.len());
    let mut t = times[0];
    let mut y = y0.to_vec();
    let Some((mut k1, ())) = g(t, &y) else {
        return OdeSolution {
            times: times.to_vec(),
            values: vec![vec![f64::INFINITY; m]; times.len()],
            blow_up: Some(t),
        };
    };
    let mut h = (1e-3 * span).max(1e-12);
    let min_step = 1e-14 * span.max(1.0);
    let mut blow_up = None;
    for &target in times {
        while blow_up.is_none() && t < target {
            let mut h_try = h.max(min_step);
            let forced = t + h_try >= target - 1e-12 * h_try.max(target.abs());
            if forced {
                h_try = target - t;
            }
            match attempt(&mut g, t, &y, &k1, h_try, rel_tol, abs_tol) {
                Some(att) if att.err <= 1.0 => {
                    t = if forced { target } else { t + h_try };
                    y = att.y;
                    k1 = att.k_end;
                    if y.iter().any(|v| !v.is_finite() || v.abs() > HUGE) {
                        blow_up = Some(t);
                    }
                    h = (h_try * growth_factor(att.err)).max(if forced { h } else { 0.0 });
                }
                other => {
                    let factor = other.map_or(0.5, |a| growth_factor(a.err));
                    h = h_try * factor;
                    if h < min_step {
                        blow_up = Some(t);
                    }
                }
            }
        }
        if blow_up.is_some() {
            values.push(vec![f64::INFINITY; m]);
        } else {
            values.push(y.clone());
        }
    }
    OdeSolution {
        times: times.to_vec(),
        values,
        blow_up,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{quantile_init, InitialDensity};
    use crate::scenario::{builtin_catalog, fn2};

    fn uniform4() -> ParticleSystem {
        quantile_init(&InitialDensity::uniform(0.0, 1.0, 1.0).unwrap(), 4).unwrap()
    }

    #[test]
    fn transport_translates_exactly() {
        let s = builtin_catalog("transport").unwrap();
        let p0 = uniform4();
        let traj = integrate(&p0, &s, &SolverConfig::new(1.0)).unwrap();
        let end = traj.last();
        assert_eq!(end.t, 1.0);
        for (a, b) in end.x.iter().zip(&p0.x) {
            assert!((a - b - 1.0).abs() < 1e-13);
        }
        assert_eq!(end.q, p0.q);
        assert_eq!(traj.snapshots.len(), 11);
    }

    #[test]
    fn growth_matches_exponential() {
        let s = builtin_catalog("growth_transport").unwrap();
        let p0 = uniform4();
        let traj = integrate(&p0, &s, &SolverConfig::new(1.0)).unwrap();
        let end = traj.last();
        for (a, b) in end.q.iter().zip(&p0.q) {
            assert!((a / b - std::f64::consts::E).abs() < 1e-7);
        }
        for (a, b) in end.x.iter().zip(&p0.x) {
            assert!((a - b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_is_constant() {
        let s = builtin_catalog("stationary").unwrap();
        let p0 = uniform4();
        let traj = integrate(&p0, &s, &SolverConfig::new(2.0)).unwrap();
        for snap in &traj.snapshots {
            assert_eq!(snap.x, p0.x);
            assert_eq!(snap.q, p0.q);
        }
    }

    #[test]
    fn guard_examples() {
        let p = uniform4();
        let cfg = SolverConfig::new(1.0);
        assert_eq!(step_guard(&p, &p, &cfg), GuardVerdict::Accept);
        let mut swapped = p.clone();
        swapped.x.swap(1, 2);
        assert!(matches!(
            step_guard(&p, &swapped, &cfg),
            GuardVerdict::Reject(GuardReason::Ordering { .. })
        ));
        let mut neg = p.clone();
        neg.q[2] = -1e-9;
        assert_eq!(
            step_guard(&p, &neg, &cfg),
            GuardVerdict::Reject(GuardReason::Mass { index: 3 })
        );
    }

    #[test]
    fn forced_collision_reports_underflow() {
        let mut s = builtin_catalog("stationary").unwrap();
        // converging field without any congestion or repulsion
        s.advection.velocity = fn2(|_, x| -x * 10.0);
        s.advection.growth_f = crate::scenario::const1(100.0);
        let p0 = ParticleSystem::new(0.0, vec![-1.0, 0.0, 1.0], vec![1.0, 1.0]).unwrap();
        // the scheme contracts exponentially and never collides: it must succeed
        assert!(integrate(&p0, &s, &SolverConfig::new(1.0)).is_ok());
        // a field that really makes particles cross within finite time
        s.advection.velocity = fn2(|_, x| if x < 0.5 { 1.0 } else { -1.0 });
        let p0 = ParticleSystem::new(0.0, vec![0.0, 0.4, 0.6, 1.0], vec![1.0; 3]).unwrap();
        let err = integrate(&p0, &s, &SolverConfig::new(1.0)).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::new(1.0);
        assert!(c.validate().is_ok());
        c.snapshot_times = vec![0.5, 0.2];
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(1.0);
        c.min_step = 1.0;
        assert!(c.validate().is_err());
        assert!(SolverConfig::new(-1.0).validate().is_err());
    }

    #[test]
    fn envelope_ode_linear_and_blow_up() {
        let times = equispaced(1.0, 5);
        let sol = solve_envelope_ode(|_, y| vec![y[0]], &[1.0], &times, 1e-10, 1e-12);
        assert!((sol.values[4][0] - std::f64::consts::E).abs() < 1e-8);
        assert!(sol.blow_up.is_none());
        // y' = y^2 from 1 blows up at t = 1
        let times = equispaced(2.0, 9);
        let sol = solve_envelope_ode(|_, y| vec![y[0] * y[0]], &[1.0], &times, 1e-8, 1e-8);
        let tb = sol.blow_up.expect("blow-up");
        assert!((tb - 1.0).abs() < 1e-3, "{tb}");
        assert!(sol.values[8][0].is_infinite());
        assert!(sol.values[3][0].is_finite());
    }
}
