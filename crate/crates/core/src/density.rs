//! Particle states and their piecewise-constant densities.

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative collision threshold: a gap below `GAP_REL * (x_N - x_0)` makes
/// the state degenerate.
pub const GAP_REL: f64 = 1e-12;

/// Relative tolerance for the equal-mass requirement of [`w1_distance`].
pub const MASS_MATCH_REL: f64 = 1e-12;

/// `N + 1` sorted particle positions and `N` positive cell masses at time `t`.
///
/// Fields are public so that candidate states (which may violate the
/// invariants) can be built and inspected; [`ParticleSystem::new`] checks them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleSystem {
    pub t: f64,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
}

impl ParticleSystem {
    pub fn new(t: f64, x: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let p = ParticleSystem { t, x, q };
        p.validate()?;
        Ok(p)
    }

    /// Checks strict ordering, positive masses and consistent lengths.
    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty() {
            return Err(Error::InvalidState("need at least one cell".into()));
        }
        if self.x.len() != self.q.len() + 1 {
            return Err(Error::InvalidState(format!(
                "{} positions for {} masses (expected N + 1 positions)",
                self.x.len(),
                self.q.len()
            )));
        }
        if let Some(i) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!(
                "position x[{i}] is not finite"
            )));
        }
        if let Some(i) = (1..self.x.len()).find(|&i| self.x[i] <= self.x[i - 1]) {
            return Err(Error::InvalidState(format!(
                "positions not strictly increasing at index {i}"
            )));
        }
        if let Some(i) = self.q.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidState(format!(
                "mass q[{}] = {} is not positive",
                i + 1,
                self.q[i]
            )));
        }
        Ok(())
    }

    /// Number of cells `N`.
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.q.iter().sum()
    }

    /// Cell densities `rho_i = q_i / (x_i - x_{i-1})`, failing on collisions.
    pub fn densities(&self) -> Result<Vec<f64>> {
        let threshold = GAP_REL * (self.x[self.x.len() - 1] - self.x[0]);
        let mut rho = Vec::with_capacity(self.q.len());
        for i in 1..self.x.len() {
            let gap = self.x[i] - self.x[i - 1];
            if !(gap >= threshold && gap > 0.0) {
                return Err(Error::Degenerate {
                    t: self.t,
                    index: i,
                    gap,
                    threshold,
                });
            }
            if !(self.q[i - 1] > 0.0) {
                return Err(Error::InvalidState(format!(
                    "mass q[{i}] = {} is not positive",
                    self.q[i - 1]
                )));
            }
            rho.push(self.q[i - 1] / gap);
        }
        Ok(rho)
    }

    /// Densities padded with the vacuum convention `rho_0 = rho_{N+1} = 0`.
    pub fn densities_extended(&self) -> Result<Vec<f64>> {
        let rho = self.densities()?;
        let mut ext = Vec::with_capacity(rho.len() + 2);
        ext.push(0.0);
        ext.extend_from_slice(&rho);
        ext.push(0.0);
        Ok(ext)
    }
}

/// Piecewise-constant density: `heights[i]` on `(breakpoints[i], breakpoints[i+1])`,
/// zero outside. An empty density has no breakpoints and no heights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseDensity {
    breakpoints: Vec<f64>,
    heights: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl PiecewiseDensity {
    pub fn new(breakpoints: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if heights.is_empty() {
            if breakpoints.len() > 1 {
                return Err(Error::InvalidDensity(
                    "breakpoints given without heights".into(),
                ));
            }
            return Ok(Self::empty());
        }
        if breakpoints.len() != heights.len() + 1 {
            return Err(Error::InvalidDensity(format!(
                "{} breakpoints for {} heights",
                breakpoints.len(),
                heights.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidDensity("non-finite breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDensity(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if let Some(h) = heights.iter().find(|h| !(**h >= 0.0 && h.is_finite())) {
            return Err(Error::InvalidDensity(format!(
                "height {h} is not non-negative"
            )));
        }
        let mut cumulative = Vec::with_capacity(breakpoints.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for (i, h) in heights.iter().enumerate() {
            acc += h * (breakpoints[i + 1] - breakpoints[i]);
            cumulative.push(acc);
        }
        Ok(PiecewiseDensity {
            breakpoints,
            heights,
            cumulative,
        })
    }

    pub fn empty() -> Self {
        PiecewiseDensity {
            breakpoints: Vec::new(),
            heights: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    /// `[first breakpoint, last breakpoint]`, or `None` when empty.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.is_empty() {
            None
        } else {
            Some((
                self.breakpoints[0],
                self.breakpoints[self.breakpoints.len() - 1],
            ))
        }
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(0.0, f64::max)
    }

    /// Value at `x`; at a breakpoint the cell to the right wins.
    pub fn value_at(&self, x: f64) -> f64 {
        match self.cell_index(x) {
            Some(i) => self.heights[i],
            None => 0.0,
        }
    }

    /// Index of the cell containing `x` (right convention at breakpoints).
    pub fn cell_index(&self, x: f64) -> Option<usize> {
        let (a, b) = self.support()?;
        if x < a || x >= b {
            return None;
        }
        let k = self.breakpoints.partition_point(|&p| p <= x);
        Some(k - 1)
    }

    /// Cumulative mass on `(-inf, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let Some((a, b)) = self.support() else {
            return 0.0;
        };
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return self.cumulative[self.cumulative.len() - 1];
        }
        let k = self.breakpoints.partition_point(|&p| p <= x) - 1;
        self.cumulative[k] + self.heights[k] * (x - self.breakpoints[k])
    }

    /// `inf { x : cdf(x) >= m }`, restricted to the support.
    pub fn quantile(&self, m: f64) -> Result<f64> {
        let mass = total_mass(self);
        if !(mass > 0.0) {
            return Err(Error::Domain("quantile of a zero-mass density".into()));
        }
        if !(0.0..=mass).contains(&m) {
            return Err(Error::Domain(format!(
                "quantile level {m} outside [0, {mass}]"
            )));
        }
        if m == 0.0 {
            return Ok(self.breakpoints[0]);
        }
        // first cell whose cumulative mass at its right edge reaches m
        let k = self.cumulative[1..].partition_point(|&c| c < m);
        let k = k.min(self.heights.len() - 1);
        let h = self.heights[k];
        if h == 0.0 {
            return Ok(self.breakpoints[k]);
        }
        let x = self.breakpoints[k] + (m - self.cumulative[k]) / h;
        Ok(x.min(self.breakpoints[k + 1]))
    }
}

/// Piecewise-constant reconstruction of a particle system.
pub fn to_density(p: &ParticleSystem) -> Result<PiecewiseDensity> {
    let rho = p.densities()?;
    PiecewiseDensity::new(p.x.clone(), rho)
}

/// Integral of the density, `sum_i q_i` for reconstructed particle densities.
pub fn total_mass(d: &PiecewiseDensity) -> f64 {
    d.cumulative.last().copied().unwrap_or(0.0)
}

/// Sum of all jumps of the profile, including the two jumps to vacuum.
pub fn total_variation(d: &PiecewiseDensity) -> f64 {
    let h = d.heights();
    if h.is_empty() {
        return 0.0;
    }
    let interior: f64 = h.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    h[0].abs() + interior + h[h.len() - 1].abs()
}

/// Sorted union of the breakpoints of two densities.
fn merged_breakpoints(a: &PiecewiseDensity, b: &PiecewiseDensity) -> Vec<f64> {
    let (pa, pb) = (a.breakpoints(), b.breakpoints());
    let mut out = Vec::with_capacity(pa.len() + pb.len());
    let (mut i, mut j) = (0, 0);
    while i < pa.len() || j < pb.len() {
        let next = if j >= pb.len() || (i < pa.len() && pa[i] <= pb[j]) {
            i += 1;
            pa[i - 1]
        } else {
            j += 1;
            pb[j - 1]
        };
        if out.last() != Some(&next) {
            out.push(next);
        }
    }
    out
}

/// Exact `int |a - b|` on the merged partition.
pub fn l1_distance(a: &PiecewiseDensity, b: &PiecewiseDensity) -> f64 {
    let grid = merged_breakpoints(a, b);
    let mut total = 0.0;
    for w in grid.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        total += (a.value_at(mid) - b.value_at(mid)).abs() * (w[1] - w[0]);
    }
    total
}

/// `int |D|` over `[0, len]` for `D` linear from `d0` to `d1`.
pub(crate) fn abs_linear_integral(d0: f64, d1: f64, len: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs()) * len
    } else {
        let s = d0.abs() + d1.abs();
        0.5 * len * (d0 * d0 + d1 * d1) / s
    }
}

/// Wasserstein-1 distance between equal-mass densities, `int |F_a - F_b|`.
pub fn w1_distance(a: &PiecewiseDensity, b: &PiecewiseDensity) -> Result<f64> {
    let (ma, mb) = (total_mass(a), total_mass(b));
    if (ma - mb).abs() > MASS_MATCH_REL * ma.max(mb) {
        return Err(Error::MassMismatch { a: ma, b: mb });
    }
    let grid = merged_breakpoints(a, b);
    let mut total = 0.0;
    let mut d_prev = grid.first().map(|&x| a.cdf(x) - b.cdf(x)).unwrap_or(0.0);
    for w in grid.windows(2) {
        let d_next = a.cdf(w[1]) - b.cdf(w[1]);
        total += abs_linear_integral(d_prev, d_next, w[1] - w[0]);
        d_prev = d_next;
    }
    Ok(total)
}

/// Density with `to`'s partition carrying `from`'s cell masses: the image of
/// `to_density(from)` under the increasing piecewise-affine map sending every
/// cell of `from` onto the matching cell of `to`.
pub fn pushforward_affine(from: &ParticleSystem, to: &ParticleSystem) -> Result<PiecewiseDensity> {
    if from.n() != to.n() {
        return Err(Error::InvalidState(format!(
            "pushforward between {} and {} cells",
            from.n(),
            to.n()
        )));
    }
    let moved = ParticleSystem {
        t: to.t,
        x: to.x.clone(),
        q: from.q.clone(),
    };
    to_density(&moved)
}
