use pbal::cli::{simulate, sweep_table};
use pbal::density::{l1_distance, to_density, PiecewiseDensity};
use pbal::reference::{compare_l1, fv_run, FvConfig};
use pbal::{builtin_catalog, quantile_init, SolverConfig};

/// Calibrated once against the mirrored-upwind grid; first-order smearing
/// of the two jumps dominates, shrinking like `sqrt(dx)`.
const TRANSPORT_ORACLE_BOUND: f64 = 0.045;

#[test]
fn transport_agrees_with_the_grid() {
    let s = builtin_catalog("transport").unwrap();
    let cfg = SolverConfig::new(1.0).with_snapshots(2);
    let rho0 = s.initial.clone().unwrap();
    let mass = rho0.total_mass();
    let mut d = Vec::new();
    for (n, j) in [(400, 1000), (800, 2000)] {
        let traj = simulate(&s, n, &cfg).unwrap();
        let mut fv = FvConfig::new(j, 1.0);
        fv.snapshot_times = cfg.snapshot_times.clone();
        let grid = fv_run(&rho0, &s, &fv).unwrap();
        d.push(compare_l1(&traj, &grid).unwrap()[1].1 / mass);
    }
    assert!(d[1] <= TRANSPORT_ORACLE_BOUND, "{d:?}");
    assert!(d[1] < d[0], "{d:?}");
}

#[test]
fn coarser_grid_is_further_away() {
    let s = builtin_catalog("repulsive_source").unwrap();
    let cfg = SolverConfig::new(0.5).with_snapshots(2);
    let rho0 = s.initial.clone().unwrap();
    let traj = simulate(&s, 400, &cfg).unwrap();
    let dist = |j: usize| {
        let mut fv = FvConfig::new(j, 0.5);
        fv.snapshot_times = cfg.snapshot_times.clone();
        compare_l1(&traj, &fv_run(&rho0, &s, &fv).unwrap()).unwrap()[1].1
    };
    assert!(dist(250) > dist(1000));
}

#[test]
fn stationary_sweep_is_bounded_by_quantisation() {
    let s = builtin_catalog("stationary").unwrap();
    let rho0 = s.initial.as_ref().unwrap();
    let m = 40_000;
    let xs: Vec<f64> = (0..=m).map(|k| -1.0 + 2.0 * k as f64 / m as f64).collect();
    let hs: Vec<f64> = xs
        .windows(2)
        .map(|w| rho0.value_at(0.5 * (w[0] + w[1])))
        .collect();
    let fine = PiecewiseDensity::new(xs, hs).unwrap();
    let init_err = |n: usize| l1_distance(&to_density(&quantile_init(rho0, n).unwrap()).unwrap(), &fine);

    let rows = sweep_table(&s, &[100, 200, 400], &SolverConfig::new(1.0)).unwrap();
    for r in &rows {
        assert!(r.distance <= 2.0 * init_err(r.n_coarse), "{r:?}");
    }
    assert!(rows[1].distance < rows[0].distance);
}

#[test]
fn transport_sweep_decreases() {
    let s = builtin_catalog("transport").unwrap();
    let rows = sweep_table(&s, &[100, 200, 400], &SolverConfig::new(1.0)).unwrap();
    assert!(rows[1].distance < rows[0].distance);
}
