//! Model data `(v, V, W, f)` together with the growth envelopes `F`, `G`,
//! `lambda`, `g` and the constants `c_f`, `w`, `|v|_inf` that the a-priori
//! bounds are built from.
//!
//! Scenarios come from the built-in [catalog](builtin_catalog) or from TOML
//! files ([`load_scenario_file`]) whose model functions are strings in the
//! [`expr`](crate::expr) language.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::{bump, Env, Expr};
use crate::init::InitialDensity;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Fn3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

pub fn fn1(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Fn1 {
    Arc::new(f)
}

pub fn fn2(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Fn2 {
    Arc::new(f)
}

pub fn fn3(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Fn3 {
    Arc::new(f)
}

pub fn const1(c: f64) -> Fn1 {
    fn1(move |_| c)
}

/// Linear interpolation through `(xs, ys)`, constant beyond the end points.
pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Fn1> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::Config(
            "tabulated function needs matching, non-empty samples".into(),
        ));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "tabulated abscissae must be strictly increasing".into(),
        ));
    }
    Ok(fn1(move |x| {
        let k = xs.partition_point(|&p| p <= x);
        if k == 0 {
            ys[0]
        } else if k == xs.len() {
            ys[ys.len() - 1]
        } else {
            let s = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
            ys[k - 1] + s * (ys[k] - ys[k - 1])
        }
    }))
}

/// Congestion factor `v` and its bounds.
#[derive(Clone)]
pub struct Congestion {
    pub v: Fn1,
    pub v_sup: f64,
    /// `G` for `|v'|` on `[0, r]`.
    pub vprime_bound: Fn1,
    /// `g` with `r + r^2 v(r) <= g(r)`; required by [`NoCollapseBranch::VDecays`].
    pub decay_g: Option<Fn1>,
}

/// External velocity `V(t, x)` and the growth functions shared by all fields.
#[derive(Clone)]
pub struct Advection {
    pub velocity: Fn2,
    pub dx_velocity: Fn2,
    /// `F(t)`.
    pub growth_f: Fn1,
    /// `G(r)`.
    pub growth_g: Fn1,
    /// `lambda(r)`, with `1/lambda` non-integrable at infinity.
    pub growth_lambda: Fn1,
}

/// Interaction potential `W` with `d/dx W` stored as two one-sided branches.
#[derive(Clone)]
pub struct Potential {
    pub w: Fn1,
    /// `d/dx W` on `(-inf, 0]`.
    pub dxw_neg: Fn1,
    /// `d/dx W` on `[0, inf)`.
    pub dxw_pos: Fn1,
    /// Absolutely continuous part of the second derivative.
    pub dx2w: Fn1,
    /// Coefficient `w(t)` of the Dirac mass at 0 in the second derivative.
    pub atom_w: Fn1,
    /// Set when `W` is identically zero, which lets the dynamics skip the convolution.
    pub is_zero: bool,
    /// Coefficients of `W` on each half line when it is polynomial there;
    /// enables the prefix-moment evaluation of the convolution sums.
    pub poly: Option<SidedPoly>,
}

/// A function that is a polynomial on `(-inf, 0]` and on `[0, inf)`,
/// coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct SidedPoly {
    pub neg: Vec<f64>,
    pub pos: Vec<f64>,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| k as f64 * a)
        .collect()
}

impl SidedPoly {
    pub fn eval(&self, x: f64, right: bool) -> f64 {
        if x < 0.0 || (x == 0.0 && !right) {
            horner(&self.neg, x)
        } else {
            horner(&self.pos, x)
        }
    }

    pub fn derivative(&self) -> SidedPoly {
        SidedPoly {
            neg: derivative(&self.neg),
            pos: derivative(&self.pos),
        }
    }
}

impl Potential {
    pub fn zero() -> Self {
        Potential {
            w: const1(0.0),
            dxw_neg: const1(0.0),
            dxw_pos: const1(0.0),
            dx2w: const1(0.0),
            atom_w: const1(0.0),
            is_zero: true,
            poly: None,
        }
    }

    /// `W` given by polynomial coefficients on each half line; the
    /// derivatives and the atom at 0 follow from the coefficients.
    pub fn sided_polynomial(neg: Vec<f64>, pos: Vec<f64>) -> Self {
        let w = SidedPoly { neg, pos };
        let d1 = w.derivative();
        let d2 = d1.derivative();
        let atom = horner(&d1.pos, 0.0) - horner(&d1.neg, 0.0);
        let is_zero = w.neg.iter().chain(&w.pos).all(|&c| c == 0.0);
        let (wf, n1, p1) = (w.clone(), d1.clone(), d1);
        Potential {
            w: fn1(move |x| wf.eval(x, true)),
            dxw_neg: fn1(move |x| horner(&n1.neg, x)),
            dxw_pos: fn1(move |x| horner(&p1.pos, x)),
            dx2w: fn1(move |x| d2.eval(x, true)),
            atom_w: const1(atom),
            is_zero,
            poly: Some(w),
        }
    }

    /// One-sided derivative: the `(-inf, 0]` branch for negative `x` (or
    /// `x == 0` with `right == false`), the `[0, inf)` branch otherwise.
    pub fn dxw(&self, x: f64, right: bool) -> f64 {
        if x < 0.0 || (x == 0.0 && !right) {
            (self.dxw_neg)(x)
        } else {
            (self.dxw_pos)(x)
        }
    }
}

/// Source term `f(t, x, rho)` and its bounds.
#[derive(Clone)]
pub struct Source {
    pub f: Fn3,
    pub c_f: f64,
    /// Multiplied by `F(t)`, bounds `|d f / d rho|` on `[0, r]`.
    pub drho_f_bound: Fn1,
    /// Optional `(t, r, x) -> eta_{t,r}([-x, x])`, the mass of the measure
    /// dominating the spatial variation of `f(t, ., rho)` for `rho <= r`.
    pub eta_mass: Option<Fn3>,
    /// Set when `f` is identically zero.
    pub is_zero: bool,
}

impl Source {
    pub fn none() -> Self {
        Source {
            f: fn3(|_, _, _| 0.0),
            c_f: 0.0,
            drho_f_bound: const1(0.0),
            eta_mass: None,
            is_zero: true,
        }
    }
}

/// Which of the two mechanisms prevents particle collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoCollapseBranch {
    /// `v` decays fast enough (uses `decay_g`).
    VDecays,
    /// `W` is repulsive at small scales (`atom_w <= 0`).
    WRepulsive,
}

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub congestion: Congestion,
    pub advection: Advection,
    pub potential: Potential,
    pub source: Source,
    pub no_collapse_branch: NoCollapseBranch,
    /// Default initial density for runs that do not supply one.
    pub initial: Option<InitialDensity>,
    /// Hex SHA-256 of the scenario's defining text.
    pub fingerprint: String,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("branch", &self.no_collapse_branch)
            .field("v_sup", &self.congestion.v_sup)
            .field("c_f", &self.source.c_f)
            .field("fingerprint", &self.fingerprint)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    /// `v(r)`.
    pub fn v(&self, r: f64) -> f64 {
        (self.congestion.v)(r)
    }

    /// `F(t)`.
    pub fn growth_f(&self, t: f64) -> f64 {
        (self.advection.growth_f)(t)
    }

    /// `G(r)`.
    pub fn growth_g(&self, r: f64) -> f64 {
        (self.advection.growth_g)(r)
    }
}

pub(crate) fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// One `(t, x, rho)` point at which the admissibility conditions are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplePoint {
    pub t: f64,
    pub x: f64,
    pub rho: f64,
}

/// Tensor grid with `n` equispaced values per axis (end points included).
pub fn sample_grid(t: (f64, f64), x: (f64, f64), rho: (f64, f64), n: usize) -> Vec<SamplePoint> {
    let axis = |(a, b): (f64, f64)| -> Vec<f64> {
        if n <= 1 {
            return vec![a];
        }
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect()
    };
    let (ts, xs, rs) = (axis(t), axis(x), axis(rho));
    let mut out = Vec::with_capacity(ts.len() * xs.len() * rs.len());
    for &t in &ts {
        for &x in &xs {
            for &rho in &rs {
                out.push(SamplePoint { t, x, rho });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `v(r1) < v(r2)` for some `r1 < r2`.
    CongestionIncreasing,
    /// `v(r)` outside `[0, v_sup]`.
    CongestionRange,
    /// `r + r^2 v(r) > g(r)`.
    DecayBound,
    /// `|V| > F G(|x|)` or `|dV/dx| > F G(|x|)`.
    AdvectionGrowth,
    /// `sign(x) V > F lambda(|x|)`.
    AdvectionOutward,
    /// `|dW/dx| > F G(|x|)` or `|d2W/dx2| > F G(|x|)`.
    InteractionGrowth,
    /// `-sign(x) dW/dx > F lambda(|x|)`.
    InteractionOutward,
    /// `|w(t)| > F(t)`.
    AtomBound,
    /// `w(t)` differs from the jump of `dW/dx` at 0.
    AtomJump,
    /// `|f| > c_f F rho`.
    SourceGrowth,
    /// `w(t) > 0` although the repulsive branch is declared.
    BranchAtomSign,
    /// Fast-decay branch declared without `g`.
    BranchMissingDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub t: f64,
    pub x: f64,
    pub rho: f64,
    /// Value of the checked quantity.
    pub lhs: f64,
    /// The bound it should respect.
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at (t={}, x={}, rho={}): {} exceeds {}",
            self.kind, self.t, self.x, self.rho, self.lhs, self.rhs
        )
    }
}

const VALIDATE_SLACK: f64 = 1e-12;

fn exceeds(lhs: f64, rhs: f64) -> bool {
    !(lhs <= rhs + VALIDATE_SLACK * (1.0 + rhs.abs()))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sampled admissibility check. Returns every violation found on `grid`; an
/// empty list means the scenario is admissible at that resolution.
pub fn scenario_validate(s: &Scenario, grid: &[SamplePoint]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, p: &SamplePoint, lhs, rhs| {
        out.push(Violation {
            kind,
            t: p.t,
            x: p.x,
            rho: p.rho,
            lhs,
            rhs,
        })
    };

    // density-only conditions, once per distinct density level
    let mut rhos: Vec<f64> = grid.iter().map(|p| p.rho).collect();
    rhos.sort_by(f64::total_cmp);
    rhos.dedup();
    let at_rho = |r: f64| SamplePoint {
        t: f64::NAN,
        x: f64::NAN,
        rho: r,
    };
    for pair in rhos.windows(2) {
        let (v1, v2) = (s.v(pair[0]), s.v(pair[1]));
        if exceeds(v2, v1) {
            push(
                ViolationKind::CongestionIncreasing,
                &at_rho(pair[1]),
                v2,
                v1,
            );
        }
    }
    for &r in &rhos {
        let v = s.v(r);
        if v < 0.0 || exceeds(v, s.congestion.v_sup) {
            push(
                ViolationKind::CongestionRange,
                &at_rho(r),
                v,
                s.congestion.v_sup,
            );
        }
        if let (NoCollapseBranch::VDecays, Some(g)) = (s.no_collapse_branch, &s.congestion.decay_g)
        {
            let lhs = r + r * r * v;
            if exceeds(lhs, g(r)) {
                push(ViolationKind::DecayBound, &at_rho(r), lhs, g(r));
            }
        }
    }

    // time-only conditions
    let mut ts: Vec<f64> = grid.iter().map(|p| p.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let pot = &s.potential;
    for &t in &ts {
        let at_t = SamplePoint {
            t,
            x: 0.0,
            rho: f64::NAN,
        };
        let w = (pot.atom_w)(t);
        let ft = s.growth_f(t);
        if exceeds(w.abs(), ft) {
            push(ViolationKind::AtomBound, &at_t, w.abs(), ft);
        }
        let jump = (pot.dxw_pos)(0.0) - (pot.dxw_neg)(0.0);
        if (jump - w).abs() > 1e-9 * (1.0 + w.abs()) {
            push(ViolationKind::AtomJump, &at_t, w, jump);
        }
        match s.no_collapse_branch {
            NoCollapseBranch::WRepulsive if w > 0.0 => {
                push(ViolationKind::BranchAtomSign, &at_t, w, 0.0)
            }
            _ => {}
        }
    }
    if s.no_collapse_branch == NoCollapseBranch::VDecays && s.congestion.decay_g.is_none() {
        let p = SamplePoint {
            t: f64::NAN,
            x: f64::NAN,
            rho: f64::NAN,
        };
        push(ViolationKind::BranchMissingDecay, &p, f64::NAN, f64::NAN);
    }

    // (t, x) conditions, once per distinct pair
    let mut txs: Vec<(f64, f64)> = grid.iter().map(|p| (p.t, p.x)).collect();
    txs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    txs.dedup();
    let adv = &s.advection;
    for &(t, x) in &txs {
        let p = SamplePoint {
            t,
            x,
            rho: f64::NAN,
        };
        let ft = s.growth_f(t);
        let bound = ft * s.growth_g(x.abs());
        let outward = ft * (adv.growth_lambda)(x.abs());
        let vel = (adv.velocity)(t, x);
        if exceeds(vel.abs(), bound) {
            push(ViolationKind::AdvectionGrowth, &p, vel.abs(), bound);
        }
        let dv = (adv.dx_velocity)(t, x);
        if exceeds(dv.abs(), bound) {
            push(ViolationKind::AdvectionGrowth, &p, dv.abs(), bound);
        }
        if exceeds(sign(x) * vel, outward) {
            push(ViolationKind::AdvectionOutward, &p, sign(x) * vel, outward);
        }
        if x != 0.0 {
            let dw = pot.dxw(x, true);
            if exceeds(dw.abs(), bound) {
                push(ViolationKind::InteractionGrowth, &p, dw.abs(), bound);
            }
            if exceeds(-sign(x) * dw, outward) {
                push(
                    ViolationKind::InteractionOutward,
                    &p,
                    -sign(x) * dw,
                    outward,
                );
            }
            let d2w = (pot.dx2w)(x);
            if exceeds(d2w.abs(), bound) {
                push(ViolationKind::InteractionGrowth, &p, d2w.abs(), bound);
            }
        }
    }

    // full (t, x, rho) condition on the source
    for p in grid {
        let val = (s.source.f)(p.t, p.x, p.rho);
        let bound = s.source.c_f * s.growth_f(p.t) * p.rho;
        if exceeds(val.abs(), bound) {
            push(ViolationKind::SourceGrowth, p, val.abs(), bound);
        }
    }
    out
}

pub const CATALOG: [&str; 5] = [
    "transport",
    "growth_transport",
    "attractive_congested",
    "repulsive_source",
    "stationary",
];

fn catalog_scenario(name: &str, description: &str) -> Scenario {
    Scenario {
        name: name.to_string(),
        description: description.to_string(),
        congestion: Congestion {
            v: const1(1.0),
            v_sup: 1.0,
            vprime_bound: const1(0.0),
            decay_g: None,
        },
        advection: Advection {
            velocity: fn2(|_, _| 0.0),
            dx_velocity: fn2(|_, _| 0.0),
            growth_f: const1(1.0),
            growth_g: const1(1.0),
            growth_lambda: const1(1.0),
        },
        potential: Potential::zero(),
        source: Source::none(),
        no_collapse_branch: NoCollapseBranch::WRepulsive,
        initial: None,
        fingerprint: sha256_hex(&format!("builtin:{name}")),
    }
}

fn congested() -> Congestion {
    Congestion {
        v: fn1(|r| (1.0 - r).max(0.0)),
        v_sup: 1.0,
        vprime_bound: const1(1.0),
        decay_g: Some(fn1(|r| 2.0 * r)),
    }
}

fn abs_potential(sign: f64) -> Potential {
    Potential::sided_polynomial(vec![0.0, -sign], vec![0.0, sign])
}

/// A fully populated scenario from the built-in catalog (see [`CATALOG`]).
pub fn builtin_catalog(name: &str) -> Result<Scenario> {
    let blocks = |b: &[(f64, f64, f64)]| InitialDensity::blocks(b).expect("catalog data");
    let s = match name {
        "transport" => {
            let mut s = catalog_scenario(name, "unit-speed translation, v = V = 1");
            s.advection.velocity = fn2(|_, _| 1.0);
            s.initial = Some(blocks(&[(-1.0, 0.0, 1.0), (0.0, 4.0, 0.5)]));
            s
        }
        "growth_transport" => {
            let mut s = builtin_catalog("transport")?;
            s.name = name.to_string();
            s.description = "unit-speed translation with linear growth f = rho".into();
            s.fingerprint = sha256_hex(&format!("builtin:{name}"));
            s.source = Source {
                f: fn3(|_, _, r| r),
                c_f: 1.0,
                drho_f_bound: const1(1.0),
                eta_mass: Some(fn3(|_, _, _| 0.0)),
                is_zero: false,
            };
            s
        }
        "attractive_congested" => {
            let mut s = catalog_scenario(
                name,
                "attraction W = |x| limited by congestion v = max(1 - r, 0)",
            );
            s.congestion = congested();
            s.advection.growth_f = const1(2.0);
            s.potential = abs_potential(1.0);
            s.no_collapse_branch = NoCollapseBranch::VDecays;
            s.initial = Some(blocks(&[(-1.0, 0.0, 0.6), (0.0, 3.0, 0.4)]));
            s
        }
        "repulsive_source" => {
            let mut s = catalog_scenario(
                name,
                "repulsion W = -|x| with a localized growth f = rho bump(x/2)",
            );
            s.congestion = congested();
            s.congestion.decay_g = None;
            s.advection.growth_f = const1(2.0);
            s.potential = abs_potential(-1.0);
            s.source = Source {
                f: fn3(|_, x, r| r * bump(0.5 * x)),
                c_f: 0.5,
                drho_f_bound: const1(1.0),
                eta_mass: None,
                is_zero: false,
            };
            s.initial = Some(blocks(&[(-1.0, 1.0, 0.5)]));
            s
        }
        "stationary" => {
            let mut s = catalog_scenario(name, "all fields zero; the state never moves");
            s.advection.growth_f = const1(0.0);
            s.initial = Some(
                InitialDensity::expression("0.75 * (1 - x^2)", -1.0, 1.0).expect("catalog data"),
            );
            s
        }
        _ => {
            return Err(Error::UnknownScenario {
                name: name.to_string(),
                valid: CATALOG.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(s)
}

/// A catalog name or the path of a scenario file.
pub fn resolve_scenario(reference: &str) -> Result<Scenario> {
    if CATALOG.contains(&reference) {
        return builtin_catalog(reference);
    }
    let path = Path::new(reference);
    if path.exists() {
        return load_scenario_file(path);
    }
    if reference.ends_with(".toml") || reference.contains(std::path::MAIN_SEPARATOR) {
        return Err(Error::ScenarioFile(format!("no such file: {reference}")));
    }
    builtin_catalog(reference)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Field {
    Num(f64),
    Text(String),
}

impl Field {
    fn parse(&self, what: &str) -> Result<Expr> {
        match self {
            Field::Num(v) => Ok(Expr::Num(*v)),
            Field::Text(src) => {
                Expr::parse(src).map_err(|e| Error::ScenarioFile(format!("{what}: {e}")))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCongestion {
    v: Field,
    v_sup: f64,
    vprime_bound: Field,
    decay_g: Option<Field>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAdvection {
    #[serde(rename = "V")]
    velocity: Field,
    #[serde(rename = "dxV")]
    dx_velocity: Field,
    #[serde(rename = "F")]
    growth_f: Field,
    #[serde(rename = "G")]
    growth_g: Field,
    lambda: Field,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePotential {
    #[serde(rename = "W")]
    w: Field,
    #[serde(rename = "dxW_neg")]
    dxw_neg: Field,
    #[serde(rename = "dxW_pos")]
    dxw_pos: Field,
    #[serde(rename = "dx2W")]
    dx2w: Field,
    atom_w: Field,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSource {
    f: Field,
    c_f: f64,
    drho_f_bound: Field,
    eta_mass: Option<Field>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMetadata {
    name: String,
    #[serde(default)]
    description: String,
    branch: NoCollapseBranch,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInitial {
    expr: Option<String>,
    support: Option<[f64; 2]>,
    blocks: Option<Vec<[f64; 3]>>,
    csv: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    metadata: FileMetadata,
    congestion: FileCongestion,
    advection: FileAdvection,
    #[serde(default)]
    potential: Option<FilePotential>,
    #[serde(default)]
    source: Option<FileSource>,
    #[serde(default)]
    initial: Option<FileInitial>,
}

fn is_zero(e: &Expr) -> bool {
    e.as_constant() == Some(0.0)
}

/// Reads a scenario file; relative CSV paths resolve against its directory.
pub fn load_scenario_file(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses scenario text.
///
/// | table         | keys (expression variables)                                                          |
/// |---------------|---------------------------------------------------------------------------------------|
/// | `metadata`    | `name`, `description`, `branch = "v_decays" \| "w_repulsive"`                          |
/// | `congestion`  | `v`, `vprime_bound`, `decay_g` (in `r`); `v_sup` number                                |
/// | `advection`   | `V`, `dxV` (in `t`, `x`); `F` (in `t`); `G`, `lambda` (in `r`)                         |
/// | `potential`   | `W`, `dxW_neg`, `dxW_pos`, `dx2W` (in `x`); `atom_w` (in `t`)                          |
/// | `source`      | `f` (in `t`, `x`, `r`); `c_f` number; `drho_f_bound` (in `r`); `eta_mass` (`t`, `r`, `x`) |
/// | `initial`     | `expr` (in `x`) with `support = [a, b]`, or `blocks = [[a, b, h], ...]`, or `csv`       |
///
/// Missing `potential` or `source` tables mean `W = 0` or `f = 0`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::ScenarioFile(e.to_string()))?;

    let r1 = |e: Expr| {
        fn1(move |r| {
            e.eval(&Env {
                r,
                ..Env::default()
            })
        })
    };
    let t1 = |e: Expr| {
        fn1(move |t| {
            e.eval(&Env {
                t,
                ..Env::default()
            })
        })
    };
    let x1 = |e: Expr| {
        fn1(move |x| {
            e.eval(&Env {
                x,
                ..Env::default()
            })
        })
    };
    let tx = |e: Expr| fn2(move |t, x| e.eval(&Env { t, x, r: 0.0 }));

    let c = &file.congestion;
    let congestion = Congestion {
        v: r1(c.v.parse("congestion.v")?),
        v_sup: c.v_sup,
        vprime_bound: r1(c.vprime_bound.parse("congestion.vprime_bound")?),
        decay_g: match &c.decay_g {
            Some(g) => Some(r1(g.parse("congestion.decay_g")?)),
            None => None,
        },
    };

    let a = &file.advection;
    let advection = Advection {
        velocity: tx(a.velocity.parse("advection.V")?),
        dx_velocity: tx(a.dx_velocity.parse("advection.dxV")?),
        growth_f: t1(a.growth_f.parse("advection.F")?),
        growth_g: r1(a.growth_g.parse("advection.G")?),
        growth_lambda: r1(a.lambda.parse("advection.lambda")?),
    };

    let potential = match &file.potential {
        None => Potential::zero(),
        Some(p) => {
            let w = p.w.parse("potential.W")?;
            let zero = is_zero(&w);
            let poly = match (w.polynomial_on_side(-1.0), w.polynomial_on_side(1.0)) {
                (Some(neg), Some(pos)) => Some(SidedPoly { neg, pos }),
                _ => None,
            };
            Potential {
                w: x1(w),
                dxw_neg: x1(p.dxw_neg.parse("potential.dxW_neg")?),
                dxw_pos: x1(p.dxw_pos.parse("potential.dxW_pos")?),
                dx2w: x1(p.dx2w.parse("potential.dx2W")?),
                atom_w: t1(p.atom_w.parse("potential.atom_w")?),
                is_zero: zero,
                poly,
            }
        }
    };

    let source = match &file.source {
        None => Source::none(),
        Some(src) => {
            let f = src.f.parse("source.f")?;
            let zero = is_zero(&f);
            let eta_mass = match &src.eta_mass {
                Some(e) => {
                    let e = e.parse("source.eta_mass")?;
                    Some(fn3(move |t, r, x| e.eval(&Env { t, x, r })))
                }
                None => None,
            };
            if !(src.c_f >= 0.0) {
                return Err(Error::ScenarioFile(
                    "source.c_f must be non-negative".into(),
                ));
            }
            Source {
                f: fn3(move |t, x, r| f.eval(&Env { t, x, r })),
                c_f: src.c_f,
                drho_f_bound: r1(src.drho_f_bound.parse("source.drho_f_bound")?),
                eta_mass,
                is_zero: zero,
            }
        }
    };

    let initial = match &file.initial {
        None => None,
        Some(init) => Some(initial_from_file(init, base_dir)?),
    };

    if !(congestion.v_sup >= 0.0) {
        return Err(Error::ScenarioFile(
            "congestion.v_sup must be non-negative".into(),
        ));
    }

    Ok(Scenario {
        name: file.metadata.name,
        description: file.metadata.description,
        congestion,
        advection,
        potential,
        source,
        no_collapse_branch: file.metadata.branch,
        initial,
        fingerprint: sha256_hex(text),
    })
}

fn initial_from_file(init: &FileInitial, base_dir: &Path) -> Result<InitialDensity> {
    match (&init.expr, &init.blocks, &init.csv) {
        (Some(src), None, None) => {
            let [a, b] = init
                .support
                .ok_or_else(|| Error::ScenarioFile("initial.expr needs support = [a, b]".into()))?;
            InitialDensity::expression(src, a, b)
        }
        (None, Some(blocks), None) => {
            let b: Vec<(f64, f64, f64)> = blocks.iter().map(|v| (v[0], v[1], v[2])).collect();
            InitialDensity::blocks(&b)
        }
        (None, None, Some(path)) => InitialDensity::from_csv(&base_dir.join(path)),
        _ => Err(Error::ScenarioFile(
            "initial needs exactly one of expr, blocks or csv".into(),
        )),
    }
}
