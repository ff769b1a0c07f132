//! Right-hand side of the particle/mass ODE system.
//!
//! For particles `x_0 < ... < x_N` with densities `rho_1..rho_N` (and
//! `rho_0 = rho_{N+1} = 0`) the system reads
//!
//! ```text
//! x_i' = v_i U_i,                 U_i = V(t, x_i) - sum_j rho_j [W(x_i - x_{j-1}) - W(x_i - x_j)]
//! q_i' = int_{x_{i-1}}^{x_i} f(t, x, rho_i) dx
//! v_i  = v(rho_{i+1}) if U_i >= 0, v(rho_i) otherwise
//! ```
//!
//! The convolution is a sum over particles `sum_k K(y - x_k) d_k` with
//! `d_k = rho_{k+1} - rho_k`; [`BreakpointSum`] evaluates such sums either
//! directly or, for kernels that are polynomial on each half line, through
//! prefix moments in `O(log N)` per point.

use serde::Serialize;

use crate::density::ParticleSystem;
use crate::error::Result;
use crate::expr::MAX_POLY_DEGREE;
use crate::quadrature::gauss8_nodes;
use crate::scenario::{Potential, Scenario, SidedPoly};

const MOMENTS: usize = MAX_POLY_DEGREE + 1;

/// Which neighbouring density feeds the congestion factor at a particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum CongestionRule {
    /// The cell the particle moves towards (the scheme).
    #[default]
    Downstream,
    /// The cell it moves away from; breaks the structural inequalities and
    /// exists only as a negative control.
    Upstream,
}

/// Sums `sum_k K(y - z_k) d_k` over sorted breakpoints `z` with weights `d`.
pub struct BreakpointSum<'a> {
    z: &'a [f64],
    d: &'a [f64],
    center: f64,
    /// `prefix[k][l] = sum_{j < k} d_j (z_j - center)^l`.
    prefix: Vec<[f64; MOMENTS]>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl<'a> BreakpointSum<'a> {
    pub fn new(z: &'a [f64], d: &'a [f64]) -> Self {
        debug_assert_eq!(z.len(), d.len());
        let center = if z.is_empty() {
            0.0
        } else {
            0.5 * (z[0] + z[z.len() - 1])
        };
        BreakpointSum {
            z,
            d,
            center,
            prefix: Vec::new(),
        }
    }

    /// Builds the prefix moments used by [`BreakpointSum::eval_poly`].
    pub fn with_moments(mut self) -> Self {
        let mut prefix = Vec::with_capacity(self.z.len() + 1);
        let mut acc = [0.0; MOMENTS];
        prefix.push(acc);
        for (&z, &d) in self.z.iter().zip(self.d) {
            let zc = z - self.center;
            let mut p = d;
            for a in acc.iter_mut() {
                *a += p;
                p *= zc;
            }
            prefix.push(acc);
        }
        self.prefix = prefix;
        self
    }

    /// `sum_k K(y - z_k) d_k` by direct summation; `K` receives the
    /// displacement and whether it is the limit from the right at 0.
    pub fn eval_direct(&self, y: f64, kernel: impl Fn(f64) -> f64) -> f64 {
        self.z
            .iter()
            .zip(self.d)
            .map(|(&z, &d)| if d == 0.0 { 0.0 } else { kernel(y - z) * d })
            .sum()
    }

    /// Same sum for a kernel that is polynomial on each half line. With
    /// `right` the breakpoints equal to `y` use the `[0, inf)` branch.
    pub fn eval_poly(&self, y: f64, kernel: &SidedPoly, right: bool) -> f64 {
        debug_assert!(!self.prefix.is_empty() || self.z.is_empty());
        if self.z.is_empty() {
            return 0.0;
        }
        let split = if right {
            self.z.partition_point(|&z| z <= y)
        } else {
            self.z.partition_point(|&z| z < y)
        };
        let left = &self.prefix[split];
        let total = &self.prefix[self.z.len()];
        let yc = y - self.center;
        let side = |coeffs: &[f64], moments: &dyn Fn(usize) -> f64| -> f64 {
            // sum_m c_m sum_l C(m, l) yc^(m-l) (-1)^l M_l
            let mut out = 0.0;
            for (m, &c) in coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let mut term = 0.0;
                for l in 0..=m {
                    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                    term += binomial(m, l) * yc.powi((m - l) as i32) * sign * moments(l);
                }
                out += c * term;
            }
            out
        };
        side(&kernel.pos, &|l| left[l]) + side(&kernel.neg, &|l| total[l] - left[l])
    }
}

/// Jumps `d_k = rho_{k+1} - rho_k`, `k = 0..N`, of the padded density vector.
pub fn density_jumps(rho_ext: &[f64]) -> Vec<f64> {
    rho_ext.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Interaction sums `sum_k W(y - x_k) d_k` (`order = 0`) or the one-sided
/// derivative sums `sum_k dW/dx(y - x_k) d_k` (`order = 1`) at many points.
pub(crate) struct Interaction<'a> {
    potential: &'a Potential,
    sum: BreakpointSum<'a>,
    derivative: Option<SidedPoly>,
}

impl<'a> Interaction<'a> {
    pub(crate) fn new(potential: &'a Potential, z: &'a [f64], d: &'a [f64]) -> Self {
        let sum = BreakpointSum::new(z, d);
        match &potential.poly {
            Some(p) if !potential.is_zero => Interaction {
                potential,
                sum: sum.with_moments(),
                derivative: Some(p.derivative()),
            },
            _ => Interaction {
                potential,
                sum,
                derivative: None,
            },
        }
    }

    pub(crate) fn w_sum(&self, y: f64) -> f64 {
        if self.potential.is_zero {
            return 0.0;
        }
        match &self.potential.poly {
            Some(p) => self.sum.eval_poly(y, p, true),
            None => self.sum.eval_direct(y, |a| (self.potential.w)(a)),
        }
    }

    pub(crate) fn dxw_sum(&self, y: f64, right: bool) -> f64 {
        if self.potential.is_zero {
            return 0.0;
        }
        match &self.derivative {
            Some(p) => self.sum.eval_poly(y, p, right),
            None => {
                let pot = self.potential;
                self.sum.eval_direct(y, |a| pot.dxw(a, right))
            }
        }
    }
}

fn raw_densities_ext(p: &ParticleSystem) -> Vec<f64> {
    let mut rho = Vec::with_capacity(p.q.len() + 2);
    rho.push(0.0);
    for i in 1..p.x.len() {
        rho.push(p.q[i - 1] / (p.x[i] - p.x[i - 1]));
    }
    rho.push(0.0);
    rho
}

/// `sum_j rho_j [W(y - x_{j-1}) - W(y - x_j)]`, the convolution of `dW/dx`
/// with the reconstructed density, evaluated from `W` alone.
pub fn convolve_dxw(p: &ParticleSystem, s: &Scenario, y: f64) -> f64 {
    if s.potential.is_zero {
        return 0.0;
    }
    let d = density_jumps(&raw_densities_ext(p));
    Interaction::new(&s.potential, &p.x, &d).w_sum(y)
}

/// `U(y) = V(t, y) - (dW/dx * rho)(y)` at arbitrary points.
pub fn free_velocity_at(p: &ParticleSystem, s: &Scenario, ys: &[f64]) -> Result<Vec<f64>> {
    let rho = p.densities_extended()?;
    let d = density_jumps(&rho);
    let inter = Interaction::new(&s.potential, &p.x, &d);
    Ok(ys
        .iter()
        .map(|&y| (s.advection.velocity)(p.t, y) - inter.w_sum(y))
        .collect())
}

/// `U_i` at every particle.
pub fn free_velocity(p: &ParticleSystem, s: &Scenario) -> Result<Vec<f64>> {
    free_velocity_at(p, s, &p.x)
}

/// Congestion factors `v_i` for given free velocities; `rho_ext` is padded
/// with the vacuum values `rho_0 = rho_{N+1} = 0`.
pub fn select_congestion(
    rho_ext: &[f64],
    u: &[f64],
    s: &Scenario,
    rule: CongestionRule,
) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(i, &ui)| {
            let downstream = match rule {
                CongestionRule::Downstream => ui >= 0.0,
                CongestionRule::Upstream => ui < 0.0,
            };
            s.v(if downstream {
                rho_ext[i + 1]
            } else {
                rho_ext[i]
            })
        })
        .collect()
}

/// `v_i = v(rho_{i+1})` if `U_i >= 0`, else `v(rho_i)`.
pub fn upwind_congestion(p: &ParticleSystem, s: &Scenario, u: &[f64]) -> Result<Vec<f64>> {
    let rho = p.densities_extended()?;
    Ok(select_congestion(&rho, u, s, CongestionRule::Downstream))
}

fn source_rate_with(p: &ParticleSystem, s: &Scenario, rho: &[f64]) -> Vec<f64> {
    if s.source.is_zero {
        return vec![0.0; p.n()];
    }
    (1..p.x.len())
        .map(|i| {
            gauss8_nodes(p.x[i - 1], p.x[i])
                .iter()
                .map(|&(x, w)| w * (s.source.f)(p.t, x, rho[i]))
                .sum()
        })
        .collect()
}

/// `q_i' = int f(t, x, rho_i) dx` over each cell, order-8 Gauss.
pub fn source_rate(p: &ParticleSystem, s: &Scenario) -> Result<Vec<f64>> {
    let rho = p.densities_extended()?;
    Ok(source_rate_with(p, s, &rho))
}

/// Everything computed in one evaluation of the right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhsEvaluation {
    pub t: f64,
    /// Padded densities `rho_0..rho_{N+1}`.
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub v_sel: Vec<f64>,
    pub xdot: Vec<f64>,
    pub qdot: Vec<f64>,
    /// Advective part of `rho_i'`, `-rho_i (x_i' - x_{i-1}') / (x_i - x_{i-1})`.
    pub rho_dot_adv: Vec<f64>,
    /// Source part of `rho_i'`, `q_i' / (x_i - x_{i-1})`.
    pub rho_dot_src: Vec<f64>,
}

pub fn rhs(p: &ParticleSystem, s: &Scenario) -> Result<RhsEvaluation> {
    rhs_with_rule(p, s, CongestionRule::Downstream)
}

pub fn rhs_with_rule(
    p: &ParticleSystem,
    s: &Scenario,
    rule: CongestionRule,
) -> Result<RhsEvaluation> {
    let rho = p.densities_extended()?;
    let d = density_jumps(&rho);
    let inter = Interaction::new(&s.potential, &p.x, &d);
    let u: Vec<f64> =
        p.x.iter()
            .map(|&y| (s.advection.velocity)(p.t, y) - inter.w_sum(y))
            .collect();
    let v_sel = select_congestion(&rho, &u, s, rule);
    let xdot: Vec<f64> = v_sel.iter().zip(&u).map(|(v, u)| v * u).collect();
    let qdot = source_rate_with(p, s, &rho);
    let mut rho_dot_adv = Vec::with_capacity(p.n());
    let mut rho_dot_src = Vec::with_capacity(p.n());
    for i in 1..p.x.len() {
        let gap = p.x[i] - p.x[i - 1];
        rho_dot_adv.push(-rho[i] * (xdot[i] - xdot[i - 1]) / gap);
        rho_dot_src.push(qdot[i - 1] / gap);
    }
    Ok(RhsEvaluation {
        t: p.t,
        rho,
        u,
        v_sel,
        xdot,
        qdot,
        rho_dot_adv,
        rho_dot_src,
    })
}

/// `d/dx U` at points `ys` off the breakpoints (or at a breakpoint with the
/// side given by `right`).
///
/// The derivative of `y -> sum_k W(y - x_k) d_k` is `sum_k dW/dx(y - x_k) d_k`,
/// which already contains both the absolutely continuous part and the atom
/// contribution `w rho(y)` of the second derivative of `W`.
pub fn dxu_at(p: &ParticleSystem, s: &Scenario, ys: &[f64], right: bool) -> Result<Vec<f64>> {
    let rho = p.densities_extended()?;
    let d = density_jumps(&rho);
    let inter = Interaction::new(&s.potential, &p.x, &d);
    Ok(ys
        .iter()
        .map(|&y| (s.advection.dx_velocity)(p.t, y) - inter.dxw_sum(y, right))
        .collect())
}

pub fn dxu_field(p: &ParticleSystem, s: &Scenario, y: f64, right: bool) -> Result<f64> {
    Ok(dxu_at(p, s, &[y], right)?[0])
}

/// The four families of structural inequalities satisfied by the downstream rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodVFamily {
    /// At a local maximum of the density the cell expands at least as fast as
    /// it would with frozen congestion.
    Maximum,
    /// Mirror statement at local minima.
    Minimum,
    /// Combined form weighted by the jump of `sign(rho_{i+1} - rho_i)`.
    Step,
    /// `(sign(rho_{i+1} - c) - sign(rho_i - c)) (v_i - v(c)) U_i <= 0`.
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodVViolation {
    pub family: GoodVFamily,
    pub t: f64,
    /// Cell index for the first three families, particle index for `Level`.
    pub index: usize,
    pub c: Option<f64>,
    /// Amount by which the inequality fails.
    pub excess: f64,
}

pub const GOOD_V_SLACK: f64 = 1e-10;

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Checks all four inequality families on one evaluated state. Besides the
/// given `levels`, every midpoint `(rho_i + rho_{i+1}) / 2` is used as `c`.
pub fn good_v_violations(ev: &RhsEvaluation, s: &Scenario, levels: &[f64]) -> Vec<GoodVViolation> {
    let rho = &ev.rho;
    let n = rho.len() - 2;
    let mut out = Vec::new();
    let sigma: Vec<f64> = (0..=n).map(|i| sign(rho[i + 1] - rho[i])).collect();
    for i in 1..=n {
        let dx = ev.xdot[i] - ev.xdot[i - 1];
        let frozen = s.v(rho[i]) * (ev.u[i] - ev.u[i - 1]);
        let mut fail = |family, excess: f64| {
            if excess > GOOD_V_SLACK {
                out.push(GoodVViolation {
                    family,
                    t: ev.t,
                    index: i,
                    c: None,
                    excess,
                });
            }
        };
        if rho[i] >= rho[i - 1] && rho[i] >= rho[i + 1] {
            fail(GoodVFamily::Maximum, frozen - dx);
        }
        if rho[i] <= rho[i - 1] && rho[i] <= rho[i + 1] {
            fail(GoodVFamily::Minimum, dx - frozen);
        }
        let ds = sigma[i] - sigma[i - 1];
        fail(GoodVFamily::Step, ds * dx - ds * frozen);
    }
    for i in 0..=n {
        let mid = 0.5 * (rho[i] + rho[i + 1]);
        for &c in levels.iter().chain(std::iter::once(&mid)) {
            let jump = sign(rho[i + 1] - c) - sign(rho[i] - c);
            if jump == 0.0 {
                continue;
            }
            let lhs = jump * (ev.v_sel[i] - s.v(c)) * ev.u[i];
            if lhs > GOOD_V_SLACK {
                out.push(GoodVViolation {
                    family: GoodVFamily::Level,
                    t: ev.t,
                    index: i,
                    c: Some(c),
                    excess: lhs,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_catalog, fn2, fn3, Potential};

    fn ps(x: &[f64], q: &[f64]) -> ParticleSystem {
        ParticleSystem::new(0.0, x.to_vec(), q.to_vec()).unwrap()
    }

    fn quadratic() -> Scenario {
        let mut s = builtin_catalog("stationary").unwrap();
        s.potential = Potential::sided_polynomial(vec![0.0, 0.0, 0.5], vec![0.0, 0.0, 0.5]);
        s
    }

    #[test]
    fn quadratic_convolution_is_first_moment() {
        let s = quadratic();
        let p = ps(&[0.0, 1.0], &[1.0]);
        assert!((convolve_dxw(&p, &s, 0.0) + 0.5).abs() < 1e-15);
        assert!((convolve_dxw(&p, &s, 2.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn direct_and_moment_sums_agree() {
        let mut s = quadratic();
        let p = ps(&[-1.0, -0.2, 0.1, 0.9, 2.5], &[0.3, 0.5, 0.2, 1.0]);
        let fast: Vec<f64> = [-3.0, -0.2, 0.4, 2.5, 4.0]
            .iter()
            .map(|&y| convolve_dxw(&p, &s, y))
            .collect();
        s.potential.poly = None;
        let slow: Vec<f64> = [-3.0, -0.2, 0.4, 2.5, 4.0]
            .iter()
            .map(|&y| convolve_dxw(&p, &s, y))
            .collect();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn even_kernel_on_symmetric_density_vanishes_at_center() {
        let s = builtin_catalog("attractive_congested").unwrap();
        let p = ps(&[-1.0, -0.4, 0.4, 1.0], &[0.3, 0.8, 0.3]);
        assert!(convolve_dxw(&p, &s, 0.0).abs() < 1e-15);
        assert_eq!(
            convolve_dxw(&p, &builtin_catalog("transport").unwrap(), 0.3),
            0.0
        );
    }

    #[test]
    fn free_velocity_examples() {
        let t = builtin_catalog("transport").unwrap();
        let p = ps(&[0.0, 0.3, 1.0], &[0.5, 0.5]);
        assert_eq!(free_velocity(&p, &t).unwrap(), vec![1.0; 3]);

        let a = builtin_catalog("attractive_congested").unwrap();
        let sym = ps(&[-1.0, 0.0, 1.0], &[0.5, 0.5]);
        let u = free_velocity(&sym, &a).unwrap();
        assert!(u[1].abs() < 1e-15 && u[0] > 0.0 && u[2] < 0.0, "{u:?}");

        let mut lin = builtin_catalog("stationary").unwrap();
        lin.advection.velocity = fn2(|_, x| x);
        assert_eq!(free_velocity(&p, &lin).unwrap(), p.x);
    }

    #[test]
    fn congestion_selection_examples() {
        let s = builtin_catalog("attractive_congested").unwrap();
        let rho = [0.0, 0.2, 0.8, 0.0];
        let v = select_congestion(&rho, &[0.0, 1.0, 0.0], &s, CongestionRule::Downstream);
        assert!((v[1] - 0.2).abs() < 1e-15);
        assert!((v[0] - 0.8).abs() < 1e-15);
        assert!((v[2] - 1.0).abs() < 1e-15);
        let v = select_congestion(&rho, &[-1.0, -1.0, -1.0], &s, CongestionRule::Downstream);
        assert!((v[1] - 0.8).abs() < 1e-15);
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn source_rate_examples() {
        let mut s = builtin_catalog("growth_transport").unwrap();
        let p = ps(&[0.0, 0.4, 1.0], &[0.3, 0.9]);
        let q = source_rate(&p, &s).unwrap();
        assert!((q[0] - 0.3).abs() < 1e-15 && (q[1] - 0.9).abs() < 1e-15);
        s.source.f = fn3(|_, x, r| r * x);
        let q = source_rate(&ps(&[0.0, 1.0], &[2.0]), &s).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-14);
        let t = builtin_catalog("transport").unwrap();
        assert_eq!(source_rate(&p, &t).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rhs_examples() {
        let p = ps(&[0.0, 0.4, 1.0], &[0.3, 0.9]);
        let ev = rhs(&p, &builtin_catalog("transport").unwrap()).unwrap();
        assert_eq!(ev.xdot, vec![1.0; 3]);
        assert_eq!(ev.qdot, vec![0.0; 2]);
        let ev = rhs(&p, &builtin_catalog("growth_transport").unwrap()).unwrap();
        assert_eq!(ev.xdot, vec![1.0; 3]);
        assert!((ev.qdot[1] - 0.9).abs() < 1e-15);

        let r = builtin_catalog("repulsive_source").unwrap();
        let sym = ps(&[-1.0, -0.5, 0.5, 1.0], &[0.2, 0.6, 0.2]);
        let ev = rhs(&sym, &r).unwrap();
        assert!(ev.xdot[0] < 0.0 && ev.xdot[3] > 0.0);
        for (i, x) in ev.xdot.iter().enumerate() {
            assert_eq!(*x, ev.v_sel[i] * ev.u[i]);
        }
    }

    #[test]
    fn dxu_examples() {
        let mut lin = builtin_catalog("stationary").unwrap();
        lin.advection.dx_velocity = fn2(|_, _| 1.0);
        let p = ps(&[0.0, 0.4, 1.0], &[0.3, 0.9]);
        assert_eq!(dxu_field(&p, &lin, 0.7, true).unwrap(), 1.0);

        let q = quadratic();
        let unit = ps(&[0.0, 0.25, 1.0], &[0.5, 0.5]);
        assert!((dxu_field(&unit, &q, 0.5, true).unwrap() + 1.0).abs() < 1e-14);

        // W = |x|: inside the support the derivative is -w rho(y), in vacuum 0
        let a = builtin_catalog("attractive_congested").unwrap();
        let blk = ps(&[0.0, 1.0], &[0.7]);
        assert!((dxu_field(&blk, &a, 0.5, true).unwrap() + 2.0 * 0.7).abs() < 1e-14);
        assert!(dxu_field(&blk, &a, 3.0, true).unwrap().abs() < 1e-14);
    }

    #[test]
    fn dxu_matches_finite_difference_of_u() {
        let s = builtin_catalog("repulsive_source").unwrap();
        let p = ps(&[-1.0, -0.3, 0.2, 0.6, 1.4], &[0.3, 0.4, 0.2, 0.5]);
        for y in [-0.8, -0.1, 0.35, 1.0, 2.0] {
            let h = 1e-6;
            let u = free_velocity_at(&p, &s, &[y - h, y + h]).unwrap();
            let fd = (u[1] - u[0]) / (2.0 * h);
            assert!(
                (fd - dxu_field(&p, &s, y, true).unwrap()).abs() < 1e-7,
                "y = {y}"
            );
        }
    }

    #[test]
    fn good_v_negative_control() {
        let s = builtin_catalog("attractive_congested").unwrap();
        let mut t = s.clone();
        t.advection.velocity = fn2(|_, _| 1.0);
        t.potential = Potential::zero();
        let p = ps(&[0.0, 1.0, 1.5], &[0.2, 0.4]);
        let ok = rhs(&p, &t).unwrap();
        assert!(good_v_violations(&ok, &t, &[0.5]).is_empty());
        let bad = rhs_with_rule(&p, &t, CongestionRule::Upstream).unwrap();
        let v = good_v_violations(&bad, &t, &[0.5]);
        assert!(v.iter().any(|v| v.family == GoodVFamily::Level));
    }

    #[test]
    fn constant_density_has_no_violations() {
        let s = builtin_catalog("attractive_congested").unwrap();
        let p = ps(&[0.0, 0.5, 1.0, 1.5], &[0.25, 0.25, 0.25]);
        let ev = rhs(&p, &s).unwrap();
        assert!(good_v_violations(&ev, &s, &[0.0, 0.25, 0.5]).is_empty());
    }
}
