//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime
//! against the budget. Runs as a plain program (`harness = false`) so the
//! lines are always printed; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use pbal::cli::{simulate, sweep_table};
use pbal::density::{l1_distance, to_density, w1_distance, PiecewiseDensity};
use pbal::diagnostics::{
    check_bounds, default_entropy_residual, envelopes, equicontinuity_modulus, integrate_audited,
    EnvelopeInputs, PhiGrid, DEFAULT_C_FRACTIONS,
};
use pbal::dynamics::{convolve_dxw, good_v_violations, rhs_with_rule, CongestionRule};
use pbal::reference::{compare_l1, fv_run, FvConfig};
use pbal::scenario::{builtin_catalog, fn2, Potential, CATALOG};
use pbal::{quantile_init, ParticleSystem, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, runtime budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn exact_transport_error() -> Outcome {
    let s = builtin_catalog("transport").map_err(err)?;
    let exact = PiecewiseDensity::new(vec![0.0, 1.0, 5.0], vec![1.0, 0.5]).map_err(err)?;
    let cfg = SolverConfig::new(1.0).with_snapshots(2);
    let mut errs = Vec::new();
    for n in [100, 200, 400, 800] {
        let traj = simulate(&s, n, &cfg).map_err(err)?;
        errs.push(l1_distance(&to_density(traj.last()).map_err(err)?, &exact));
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    check(
        ratios.iter().all(|&r| r >= 1.4),
        format!("errors {}, ratios {ratios:.3?}", sci(&errs)),
    )
}

fn mass_saturation() -> Outcome {
    let s = builtin_catalog("growth_transport").map_err(err)?;
    let traj =
        simulate(&s, 100, &SolverConfig::new(1.0).with_tolerances(1e-8, 1e-8)).map_err(err)?;
    let q0 = traj.snapshots[0].total_mass();
    let expect = q0 * std::f64::consts::E;
    let rel = (traj.last().total_mass() - expect).abs() / expect;
    let q = pbal::diagnostics::envelope_q(&s, 1.0);
    check(
        rel <= 1e-6 && (q - std::f64::consts::E).abs() < 1e-9,
        format!("relative mass error {rel:.2e}, Q(1) = {q:.12}"),
    )
}

fn bound_suite() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["attractive_congested", "repulsive_source"] {
        let s = builtin_catalog(name).map_err(err)?;
        let cfg = SolverConfig::new(1.0).with_snapshots(21);
        let mut tv = Vec::new();
        for n in [100, 200, 400, 800] {
            let traj = simulate(&s, n, &cfg).map_err(err)?;
            let inp = EnvelopeInputs::from_state(&traj.snapshots[0]).map_err(err)?;
            let env = envelopes(&s, &inp, 1.0, &traj.times());
            let rep = check_bounds(&traj, &env, 1e-6).map_err(err)?;
            ok &= rep.all_ok;
            tv.push(rep.max_total_variation);
        }
        let spread = tv[1].max(tv[3]) / tv[1].min(tv[3]);
        ok &= spread < 2.0;
        details.push(format!("{name}: max TV {tv:.3?}, spread {spread:.3}"));
    }
    check(ok, details.join("; "))
}

fn good_v_audit() -> Outcome {
    let mut checked = 0;
    let mut found = 0;
    for name in CATALOG {
        let s = builtin_catalog(name).map_err(err)?;
        let p0 = quantile_init(s.initial.as_ref().unwrap(), 200).map_err(err)?;
        let r0 = to_density(&p0).map_err(err)?.max_height();
        let levels: Vec<f64> = DEFAULT_C_FRACTIONS.iter().map(|c| c * r0).collect();
        let (_, v, k) =
            integrate_audited(&p0, &s, &SolverConfig::new(1.0), &levels).map_err(err)?;
        checked += k;
        found += v.len();
    }
    let mut t = builtin_catalog("attractive_congested").map_err(err)?;
    t.advection.velocity = fn2(|_, _| 1.0);
    t.potential = Potential::zero();
    let p = ParticleSystem::new(0.0, vec![0.0, 1.0, 1.5], vec![0.2, 0.4]).map_err(err)?;
    let bad = rhs_with_rule(&p, &t, CongestionRule::Upstream).map_err(err)?;
    let control = good_v_violations(&bad, &t, &[0.5]).len();
    check(
        found == 0 && control >= 1,
        format!("{found} violations over {checked} states; upstream control gives {control}"),
    )
}

fn entropy_scaling() -> Outcome {
    let s = builtin_catalog("attractive_congested").map_err(err)?;
    let cfg = SolverConfig::new(1.0).with_snapshots(1025);
    let mut res = Vec::new();
    for n in [100, 200, 400, 800] {
        let traj = simulate(&s, n, &cfg).map_err(err)?;
        let rep = default_entropy_residual(&traj, &s, PhiGrid::default(), &DEFAULT_C_FRACTIONS)
            .map_err(err)?;
        res.push(rep.res_minus);
    }
    check(
        res.windows(2).all(|w| w[1] <= 0.6 * w[0] + 1e-6),
        format!("res- {}", sci(&res)),
    )
}

fn self_convergence() -> Outcome {
    let cfg = SolverConfig::new(1.0).with_snapshots(21);
    let mut ok = true;
    let mut details = Vec::new();
    for name in CATALOG {
        let s = builtin_catalog(name).map_err(err)?;
        let rows = sweep_table(&s, &[100, 200, 400, 800], &cfg).map_err(err)?;
        let d: Vec<f64> = rows.iter().map(|r| r.distance).collect();
        ok &= d.windows(2).all(|w| w[0] >= 1.3 * w[1] && w[1] > 0.0);
        details.push(format!("{name} {}", sci(&d)));
    }
    check(ok, details.join("; "))
}

fn oracle_agreement() -> Outcome {
    let s = builtin_catalog("repulsive_source").map_err(err)?;
    let cfg = SolverConfig::new(1.0).with_snapshots(2);
    let rho0 = s.initial.clone().unwrap();
    let mass = rho0.total_mass();
    let mut d = Vec::new();
    for (n, j) in [(800, 2000), (1600, 4000)] {
        let traj = simulate(&s, n, &cfg).map_err(err)?;
        let mut fv = FvConfig::new(j, 1.0);
        fv.snapshot_times = cfg.snapshot_times.clone();
        let grid = fv_run(&rho0, &s, &fv).map_err(err)?;
        d.push(compare_l1(&traj, &grid).map_err(err)?[1].1);
    }
    check(
        d[0] <= 0.05 * mass && d[1] < d[0],
        format!("L1 / mass {:.4} -> {:.4}", d[0] / mass, d[1] / mass),
    )
}

fn equicontinuity() -> Outcome {
    let s = builtin_catalog("growth_transport").map_err(err)?;
    let cfg = SolverConfig::new(1.0).with_snapshots(21);
    let h = 0.05;
    let mut ks = Vec::new();
    for n in [100, 200, 400, 800] {
        let traj = simulate(&s, n, &cfg).map_err(err)?;
        let m = equicontinuity_modulus(&traj, h).map_err(err)?;
        ks.push(m.iter().map(|p| p.total / h).fold(0.0, f64::max));
    }
    let spread =
        ks.iter().cloned().fold(0.0, f64::max) / ks.iter().cloned().fold(f64::INFINITY, f64::min);
    check(spread < 2.0, format!("K {ks:.4?}, spread {spread:.4}"))
}

fn random_density(rng: &mut ChaCha8Rng, mass: f64) -> PiecewiseDensity {
    let k = rng.gen_range(1..6);
    let mut bps: Vec<f64> = (0..=k).map(|_| rng.gen_range(-2.0..2.0)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let hs: Vec<f64> = (0..bps.len() - 1)
        .map(|_| rng.gen_range(0.0..2.0))
        .collect();
    let d = PiecewiseDensity::new(bps.clone(), hs.clone()).unwrap();
    let scale = mass / pbal::density::total_mass(&d);
    PiecewiseDensity::new(bps, hs.iter().map(|h| h * scale).collect()).unwrap()
}

/// Merged-partition computation written independently of the library.
fn exact_distances(a: &PiecewiseDensity, b: &PiecewiseDensity) -> (f64, f64) {
    let mut pts: Vec<f64> = a
        .breakpoints()
        .iter()
        .chain(b.breakpoints())
        .copied()
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let (mut l1, mut w1, mut fa, mut fb) = (0.0, 0.0, 0.0, 0.0);
    for w in pts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let mid = 0.5 * (x0 + x1);
        let (ha, hb) = (a.value_at(mid), b.value_at(mid));
        let len = x1 - x0;
        l1 += (ha - hb).abs() * len;
        let (g0, g1) = (fa - fb, fa - fb + (ha - hb) * len);
        w1 += if g0 * g1 >= 0.0 {
            0.5 * (g0.abs() + g1.abs()) * len
        } else {
            0.5 * (g0 * g0 + g1 * g1) / (g1 - g0).abs() * len
        };
        fa += ha * len;
        fb += hb * len;
    }
    (l1, w1)
}

/// Midpoint Riemann sums of `|a - b|` and `|F_a - F_b|` on `samples` points.
fn riemann_distances(a: &PiecewiseDensity, b: &PiecewiseDensity, samples: usize) -> (f64, f64) {
    let (lo, hi) = (-2.0, 2.0);
    let h = (hi - lo) / samples as f64;
    let (mut l1, mut w1) = (0.0, 0.0);
    for k in 0..samples {
        let x = lo + (k as f64 + 0.5) * h;
        l1 += (a.value_at(x) - b.value_at(x)).abs() * h;
        w1 += (a.cdf(x) - b.cdf(x)).abs() * h;
    }
    (l1, w1)
}

fn micro_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240917);
    let mut s = builtin_catalog("stationary").map_err(err)?;
    s.potential = Potential::sided_polynomial(vec![0.0, 0.0, 0.5], vec![0.0, 0.0, 0.5]);
    let mut conv_err: f64 = 0.0;
    let (mut riemann_err, mut exact_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let n = rng.gen_range(2..12);
        let mut x: Vec<f64> = (0..=n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        x.sort_by(f64::total_cmp);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let p = ParticleSystem::new(0.0, x.clone(), q.clone()).map_err(err)?;
        let m0: f64 = q.iter().sum();
        let m1: f64 = (0..n).map(|i| q[i] * 0.5 * (x[i] + x[i + 1])).sum();
        for _ in 0..5 {
            let y = rng.gen_range(-4.0..4.0);
            let closed = y * m0 - m1;
            let got = convolve_dxw(&p, &s, y);
            conv_err = conv_err.max((got - closed).abs() / closed.abs().max(1e-300));
        }

        let a = random_density(&mut rng, 1.0);
        let b = random_density(&mut rng, 1.0);
        let (l1_exact, w1_exact) = exact_distances(&a, &b);
        let (l1_riem, w1_riem) = riemann_distances(&a, &b, 1_000_000);
        let w1 = w1_distance(&a, &b).map_err(err)?;
        let l1 = l1_distance(&a, &b);
        riemann_err = riemann_err
            .max((w1 - w1_riem).abs())
            .max((l1 - l1_riem).abs());
        exact_err = exact_err
            .max((w1 - w1_exact).abs())
            .max((l1 - l1_exact).abs());
    }
    check(
        conv_err <= 1e-12 && riemann_err <= 1e-3 && exact_err <= 1e-10,
        format!(
            "convolution {conv_err:.1e}, vs Riemann {riemann_err:.1e}, vs exact {exact_err:.1e}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("exact-transport convergence", 10, exact_transport_error),
        ("mass envelope saturation", 2, mass_saturation),
        ("a-priori bound suite", 60, bound_suite),
        ("structural inequality audit", 30, good_v_audit),
        ("entropy-residual scaling", 120, entropy_scaling),
        ("self-convergence", 120, self_convergence),
        ("oracle agreement", 60, oracle_agreement),
        ("equicontinuity", 30, equicontinuity),
        ("exactness micro-oracles", 10, micro_oracles),
    ];
    let args: Vec<String> = std::env::args().collect();
    let filter = args.iter().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let id = format!("{}", k + 1);
        if filter.is_some_and(|f| f != &id && !name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match &outcome {
            Ok(d) => (in_time, d.as_str()),
            Err(d) => (false, d.as_str()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {detail} [{:.2} s / {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
