use pbal::density::{l1_distance, to_density, w1_distance, ParticleSystem};
use pbal::diagnostics::first_difference_excess;
use pbal::dynamics::{rhs, BreakpointSum};
use pbal::integrator::integrate;
use pbal::scenario::{builtin_catalog, fn2, Potential, SidedPoly};
use pbal::{quantile_init, InitialDensity, SolverConfig};
use proptest::prelude::*;

/// Sorted positions with gaps in `[0.05, 1]` and masses in `[0.05, 1]`.
fn state() -> impl Strategy<Value = ParticleSystem> {
    (2usize..12)
        .prop_flat_map(|n| {
            (
                -2.0f64..2.0,
                prop::collection::vec(0.05f64..1.0, n),
                prop::collection::vec(0.05f64..1.0, n),
            )
        })
        .prop_map(|(x0, gaps, q)| {
            let mut x = vec![x0];
            for g in gaps {
                x.push(x[x.len() - 1] + g);
            }
            ParticleSystem::new(0.0, x, q).unwrap()
        })
}

fn blocks() -> impl Strategy<Value = InitialDensity> {
    prop::collection::vec((0.2f64..1.0, 0.2f64..1.5), 1..4).prop_map(|parts| {
        let mut a = -1.5;
        let b: Vec<(f64, f64, f64)> = parts
            .into_iter()
            .map(|(len, h)| {
                let block = (a, a + len, h);
                a += len;
                block
            })
            .collect();
        InitialDensity::blocks(&b).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn fast_sum_matches_direct(p in state(), y in -4.0f64..4.0, c in prop::collection::vec(-1.0f64..1.0, 5)) {
        let rho = p.densities_extended().unwrap();
        let d: Vec<f64> = rho.windows(2).map(|w| w[1] - w[0]).collect();
        let poly = SidedPoly { neg: c.clone(), pos: c.iter().rev().cloned().collect() };
        let fast = BreakpointSum::new(&p.x, &d).with_moments();
        let direct = BreakpointSum::new(&p.x, &d);
        for right in [false, true] {
            let a = fast.eval_poly(y, &poly, right);
            let b = direct.eval_direct(y, |z| poly.eval(z, right));
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn conservative_runs_keep_order_and_mass(rho0 in blocks(), n in 10usize..60) {
        let s = builtin_catalog("attractive_congested").unwrap();
        let p0 = quantile_init(&rho0, n).unwrap();
        let traj = integrate(&p0, &s, &SolverConfig::new(0.5)).unwrap();
        let m0 = p0.total_mass();
        for p in &traj.snapshots {
            prop_assert!(p.x.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(p.q.iter().all(|&q| q > 0.0));
            prop_assert!(((p.total_mass() - m0) / m0).abs() < 1e-12);
            // congestion caps the density at 1 once it is reached
            prop_assert!(to_density(p).unwrap().max_height() <= 1.0_f64.max(rho0.sup_norm()) + 1e-6);
        }
    }

    #[test]
    fn first_difference_estimate(rho0 in blocks(), n in 10usize..60) {
        for name in ["attractive_congested", "repulsive_source"] {
            let s = builtin_catalog(name).unwrap();
            let p0 = quantile_init(&rho0, n).unwrap();
            prop_assert!(first_difference_excess(&p0, &s).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn reversible_transport_returns(rho0 in blocks(), n in 5usize..40) {
        let mut fwd = builtin_catalog("transport").unwrap();
        fwd.advection.velocity = fn2(|_, x| 1.0 + 0.5 * x.sin());
        let mut back = fwd.clone();
        back.advection.velocity = fn2(|_, x| -1.0 - 0.5 * x.sin());
        let p0 = quantile_init(&rho0, n).unwrap();
        let cfg = SolverConfig::new(1.0).with_snapshots(2).with_tolerances(1e-10, 1e-10);
        let mid = integrate(&p0, &fwd, &cfg).unwrap();
        let mut start = mid.last().clone();
        start.t = 0.0;
        let end = integrate(&start, &back, &cfg).unwrap();
        let err = end.last().x.iter().zip(&p0.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn distances_are_consistent(a in state(), b in state()) {
        let (da, db) = (to_density(&a).unwrap(), to_density(&b).unwrap());
        let l1 = l1_distance(&da, &db);
        prop_assert!((l1 - l1_distance(&db, &da)).abs() < 1e-12);
        prop_assert!(l1 <= a.total_mass() + b.total_mass() + 1e-12);
        let scaled = ParticleSystem::new(0.0, b.x.clone(), b.q.iter().map(|q| q * a.total_mass() / b.total_mass()).collect()).unwrap();
        let w = w1_distance(&da, &to_density(&scaled).unwrap()).unwrap();
        prop_assert!(w >= 0.0);
        let span = a.x[a.x.len() - 1].max(b.x[b.x.len() - 1]) - a.x[0].min(b.x[0]);
        prop_assert!(w <= a.total_mass() * span + 1e-12);
    }
}

#[test]
fn tighter_tolerance_reduces_error() {
    // V = x, v = W = 0 otherwise: x_i(t) = x_i(0) e^t
    let mut s = builtin_catalog("transport").unwrap();
    s.advection.velocity = fn2(|_, x| x);
    s.potential = Potential::zero();
    let p0 = quantile_init(&InitialDensity::uniform(0.5, 1.5, 1.0).unwrap(), 20).unwrap();
    let err = |tol: f64| {
        let cfg = SolverConfig::new(2.0)
            .with_snapshots(2)
            .with_tolerances(tol, tol);
        let traj = integrate(&p0, &s, &cfg).unwrap();
        traj.last()
            .x
            .iter()
            .zip(&p0.x)
            .map(|(x, x0)| (x - x0 * 2f64.exp()).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(1e-5), err(1e-9));
    assert!(fine < coarse, "{fine} vs {coarse}");
    assert!(fine < 1e-7);
}

#[test]
fn rhs_is_translation_covariant() {
    let s = builtin_catalog("attractive_congested").unwrap();
    let p = ParticleSystem::new(0.0, vec![-1.0, -0.2, 0.5, 2.0], vec![0.3, 0.5, 0.4]).unwrap();
    let shifted =
        ParticleSystem::new(0.0, p.x.iter().map(|x| x + 3.25).collect(), p.q.clone()).unwrap();
    let (a, b) = (rhs(&p, &s).unwrap(), rhs(&shifted, &s).unwrap());
    for (u, v) in a.xdot.iter().zip(&b.xdot) {
        assert!((u - v).abs() < 1e-12);
    }
}
