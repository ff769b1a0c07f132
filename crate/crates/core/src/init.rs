//! Equal-mass quantile initialisation.
//!
//! Every supported initial density is reduced to a piecewise-linear profile
//! (possibly discontinuous between pieces), whose CDF is then exact.

use std::path::Path;

use crate::density::ParticleSystem;
use crate::error::{Error, Result};
use crate::expr::{Env, Expr};

/// Panels used to sample a non-constant expression.
pub const EXPR_PANELS: usize = 1 << 16;

const BISECTION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    a: f64,
    b: f64,
    ya: f64,
    yb: f64,
}

impl Piece {
    fn mass(&self) -> f64 {
        0.5 * (self.ya + self.yb) * (self.b - self.a)
    }

    fn mass_to(&self, x: f64) -> f64 {
        let s = x - self.a;
        let slope = (self.yb - self.ya) / (self.b - self.a);
        s * (self.ya + 0.5 * slope * s)
    }
}

/// A compactly supported, non-negative initial density of positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDensity {
    pieces: Vec<Piece>,
    cumulative: Vec<f64>,
    label: String,
}

impl InitialDensity {
    fn from_pieces(pieces: Vec<Piece>, label: String) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InitialDatum("empty profile".into()));
        }
        for w in pieces.windows(2) {
            if w[1].a < w[0].b {
                return Err(Error::InitialDatum("pieces overlap or are unsorted".into()));
            }
        }
        for p in &pieces {
            if !(p.b > p.a) || !p.a.is_finite() || !p.b.is_finite() {
                return Err(Error::InitialDatum(format!(
                    "bad interval [{}, {}]",
                    p.a, p.b
                )));
            }
            if !(p.ya >= 0.0 && p.yb >= 0.0 && p.ya.is_finite() && p.yb.is_finite()) {
                return Err(Error::InitialDatum(format!(
                    "negative or non-finite value on [{}, {}]",
                    p.a, p.b
                )));
            }
        }
        let mut cumulative = vec![0.0];
        let mut acc = 0.0;
        for p in &pieces {
            acc += p.mass();
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::InitialDatum("total mass must be positive".into()));
        }
        Ok(InitialDensity {
            pieces,
            cumulative,
            label,
        })
    }

    /// Piecewise-constant data: `(a, b, height)` triples, sorted and disjoint.
    pub fn blocks(blocks: &[(f64, f64, f64)]) -> Result<Self> {
        let pieces = blocks
            .iter()
            .map(|&(a, b, h)| Piece { a, b, ya: h, yb: h })
            .collect();
        let label = blocks
            .iter()
            .map(|(a, b, h)| format!("{h}*[{a},{b}]"))
            .collect::<Vec<_>>()
            .join(" + ");
        Self::from_pieces(pieces, format!("blocks {label}"))
    }

    /// `mass / (b - a)` on `[a, b]`.
    pub fn uniform(a: f64, b: f64, mass: f64) -> Result<Self> {
        Self::blocks(&[(a, b, mass / (b - a))])
    }

    /// An expression in `x` restricted to `[a, b]`.
    pub fn expression(src: &str, a: f64, b: f64) -> Result<Self> {
        let e = Expr::parse(src)?;
        let mut d = match e.as_constant() {
            Some(c) => Self::blocks(&[(a, b, c)])?,
            None => Self::sampled(
                |x| {
                    e.eval(&Env {
                        x,
                        ..Env::default()
                    })
                },
                a,
                b,
            )?,
        };
        d.label = format!("{src} on [{a}, {b}]");
        Ok(d)
    }

    /// Any function sampled on [`EXPR_PANELS`] panels of `[a, b]`.
    pub fn sampled(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InitialDatum(format!("empty support [{a}, {b}]")));
        }
        let n = EXPR_PANELS;
        let h = (b - a) / n as f64;
        let xs: Vec<f64> = (0..=n)
            .map(|k| if k == n { b } else { a + h * k as f64 })
            .collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        if let Some(k) = ys.iter().position(|y| !(*y >= 0.0 && y.is_finite())) {
            return Err(Error::InitialDatum(format!(
                "value {} at x = {} is negative or not finite",
                ys[k], xs[k]
            )));
        }
        Self::grid(xs, ys)
    }

    /// Linear interpolation of `(position, value)` samples.
    pub fn grid(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InitialDatum(
                "grid needs at least two matching samples".into(),
            ));
        }
        let pieces = (1..xs.len())
            .map(|k| Piece {
                a: xs[k - 1],
                b: xs[k],
                ya: ys[k - 1],
                yb: ys[k],
            })
            .collect();
        let label = format!(
            "grid of {} samples on [{}, {}]",
            xs.len(),
            xs[0],
            xs[xs.len() - 1]
        );
        Self::from_pieces(pieces, label)
    }

    /// Two-column CSV `(position, value)`, optional header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::InitialDatum(format!("{}: {e}", path.display())))?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::InitialDatum(format!(
                    "{}: line {} has {} columns, expected 2",
                    path.display(),
                    line + 1,
                    record.len()
                )));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::InitialDatum(format!(
                        "{}: line {} is not numeric",
                        path.display(),
                        line + 1
                    )))
                }
            }
        }
        let mut d = Self::grid(xs, ys)?;
        d.label = format!("csv {}", path.display());
        Ok(d)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `[a, b]`, the convex hull of the support.
    pub fn support(&self) -> (f64, f64) {
        (self.pieces[0].a, self.pieces[self.pieces.len() - 1].b)
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.ya.max(p.yb))
            .fold(0.0, f64::max)
    }

    /// Variation of the profile with zero exterior values.
    pub fn total_variation(&self) -> f64 {
        let mut tv = 0.0;
        let mut prev_end = (f64::NEG_INFINITY, 0.0);
        for p in &self.pieces {
            let left = if p.a == prev_end.0 {
                prev_end.1
            } else {
                tv += prev_end.1;
                0.0
            };
            tv += (p.ya - left).abs() + (p.yb - p.ya).abs();
            prev_end = (p.b, p.yb);
        }
        tv + prev_end.1
    }

    /// Value at `x` (right-continuous at piece boundaries).
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.b <= x);
        match self.pieces.get(k) {
            Some(p) if x >= p.a => p.ya + (p.yb - p.ya) * (x - p.a) / (p.b - p.a),
            _ => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.b <= x);
        match self.pieces.get(k) {
            None => self.total_mass(),
            Some(p) if x <= p.a => self.cumulative[k],
            Some(p) => self.cumulative[k] + p.mass_to(x),
        }
    }

    /// Leftmost `x` with `cdf(x) >= m`, by bisection.
    fn quantile(&self, m: f64) -> f64 {
        let (a, b) = self.support();
        // cdf(lo) < m <= cdf(hi)
        let (mut lo, mut hi) = (a, b);
        if self.cdf(lo) >= m {
            return lo;
        }
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= m {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// `N` equal-mass cells: `x_0 = a`, `x_N = b`, `x_i` the leftmost point where
/// the CDF reaches `i / N` of the mass, all `q_i = mass / N`.
pub fn quantile_init(rho0: &InitialDensity, n: usize) -> Result<ParticleSystem> {
    if n == 0 {
        return Err(Error::Config("number of cells must be at least 1".into()));
    }
    let mass = rho0.total_mass();
    let (a, b) = rho0.support();
    let mut x = Vec::with_capacity(n + 1);
    x.push(a);
    for i in 1..n {
        x.push(rho0.quantile(mass * i as f64 / n as f64));
    }
    x.push(b);
    if let Some(i) = (1..x.len()).find(|&i| x[i] <= x[i - 1]) {
        return Err(Error::InitialDatum(format!(
            "particles {} and {i} coincide at x = {}; the density has an interior \
             gap or is too concentrated for N = {n}; increase N or perturb the datum",
            i - 1,
            x[i]
        )));
    }
    ParticleSystem::new(0.0, x, vec![mass / n as f64; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{l1_distance, to_density, total_variation, PiecewiseDensity};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn uniform_quantiles() {
        let p = quantile_init(&InitialDensity::uniform(0.0, 1.0, 1.0).unwrap(), 4).unwrap();
        assert!(close(&p.x, &[0.0, 0.25, 0.5, 0.75, 1.0], 1e-14));
        assert!(p.q.iter().all(|&q| q == 0.25));
    }

    #[test]
    fn block_quantiles() {
        let p = quantile_init(&InitialDensity::blocks(&[(0.0, 0.5, 2.0)]).unwrap(), 2).unwrap();
        assert!(close(&p.x, &[0.0, 0.25, 0.5], 1e-14));
        assert_eq!(p.q, vec![0.5, 0.5]);
    }

    #[test]
    fn masses_halve_with_doubling() {
        let d = InitialDensity::expression("1 + x", 0.0, 2.0).unwrap();
        let q1 = quantile_init(&d, 50).unwrap().q[0];
        let q2 = quantile_init(&d, 100).unwrap().q[0];
        assert!((q1 - 2.0 * q2).abs() < 1e-15);
    }

    #[test]
    fn gap_and_spike_inputs() {
        let d = InitialDensity::blocks(&[(0.0, 1.0, 1.0), (2.0, 3.0, 1.0)]).unwrap();
        let p = quantile_init(&d, 2).unwrap();
        assert!((p.x[1] - 1.0).abs() < 1e-12);
        let spike = InitialDensity::blocks(&[(0.0, 1e-15, 1e15)]).unwrap();
        assert!(matches!(
            quantile_init(&spike, 4),
            Err(Error::InitialDatum(_))
        ));
        assert!(quantile_init(&d, 0).is_err());
    }

    #[test]
    fn profile_functionals() {
        let d = InitialDensity::blocks(&[(-1.0, 0.0, 1.0), (0.0, 4.0, 0.5)]).unwrap();
        assert_eq!(d.total_mass(), 3.0);
        assert_eq!(d.total_variation(), 2.0);
        assert_eq!(d.sup_norm(), 1.0);
        assert_eq!(d.cdf(-0.5), 0.5);
        assert_eq!(d.cdf(2.0), 2.0);
        assert_eq!(d.value_at(0.0), 0.5);
        let g = InitialDensity::expression("0.75 * (1 - x^2)", -1.0, 1.0).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-9);
        assert!((g.total_variation() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn reconstruction_respects_sup_and_variation() {
        let d = InitialDensity::expression("0.75 * (1 - x^2)", -1.0, 1.0).unwrap();
        for n in [7, 64, 300] {
            let p = quantile_init(&d, n).unwrap();
            let rho = to_density(&p).unwrap();
            assert_eq!(rho.support(), Some((-1.0, 1.0)));
            assert!(rho.max_height() <= d.sup_norm() + 1e-8);
            assert!(total_variation(&rho) <= d.total_variation() + 1e-8);
        }
    }

    #[test]
    fn l1_error_decreases_with_n() {
        let d = InitialDensity::expression("0.75 * (1 - x^2)", -1.0, 1.0).unwrap();
        // reference: fine piecewise-constant average of the profile
        let m = 20_000;
        let b: Vec<f64> = (0..=m).map(|k| -1.0 + 2.0 * k as f64 / m as f64).collect();
        let h: Vec<f64> = b
            .windows(2)
            .map(|w| (d.cdf(w[1]) - d.cdf(w[0])) / (w[1] - w[0]))
            .collect();
        let fine = PiecewiseDensity::new(b, h).unwrap();
        let mut prev = f64::INFINITY;
        for n in [100, 200, 400, 800] {
            let e = l1_distance(&to_density(&quantile_init(&d, n).unwrap()).unwrap(), &fine);
            assert!(e < prev, "N = {n}: {e} vs {prev}");
            prev = e;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn csv_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho0.csv");
        std::fs::write(&path, "x,rho\n0,0\n1,2\n2,0\n").unwrap();
        let d = InitialDensity::from_csv(&path).unwrap();
        assert_eq!(d.total_mass(), 2.0);
        assert_eq!(d.value_at(0.5), 1.0);
        std::fs::write(&path, "0,1\n1,-1\n").unwrap();
        assert!(InitialDensity::from_csv(&path).is_err());
    }
}
