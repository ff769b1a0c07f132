// Particle scheme against the finite-volume reference on the repulsive
// scenario with a localized source, under joint refinement.

use std::error::Error;

use pbal::reference::{compare_l1, fv_run, Flux, FvConfig};
use pbal::{builtin_catalog, integrate, quantile_init, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let s = builtin_catalog("repulsive_source")?;
    let rho0 = s.initial.clone().unwrap();
    let cfg = SolverConfig::new(1.0).with_snapshots(3);
    for flux in [Flux::MirroredUpwind, Flux::Rusanov] {
        for (n, j) in [(100, 250), (200, 500), (400, 1000)] {
            let traj = integrate(&quantile_init(&rho0, n)?, &s, &cfg)?;
            let mut fv = FvConfig::new(j, 1.0);
            fv.flux = flux;
            fv.snapshot_times = cfg.snapshot_times.clone();
            let grid = fv_run(&rho0, &s, &fv)?;
            let d = compare_l1(&traj, &grid)?;
            let (t, l1) = d[d.len() - 1];
            println!(
                "{flux:?} N = {n:>4}, J = {j:>5}: L1 at t = {t} is {l1:.4e} ({} grid steps)",
                grid.steps
            );
        }
    }
    Ok(())
}
