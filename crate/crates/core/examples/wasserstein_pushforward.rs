// Exact W1 and L1 distances between piecewise-constant densities, and the
// two-term time modulus built from the cellwise affine push-forward.

use std::error::Error;

use pbal::density::{l1_distance, pushforward_affine, to_density, w1_distance, PiecewiseDensity};
use pbal::diagnostics::equicontinuity_modulus;
use pbal::{builtin_catalog, integrate, quantile_init, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let a = PiecewiseDensity::new(vec![0.0, 1.0], vec![1.0])?;
    let b = PiecewiseDensity::new(vec![0.5, 1.5], vec![1.0])?;
    println!(
        "W1 = {}, L1 = {}",
        w1_distance(&a, &b)?,
        l1_distance(&a, &b)
    );

    let s = builtin_catalog("growth_transport")?;
    let p0 = quantile_init(s.initial.as_ref().unwrap(), 60)?;
    let traj = integrate(&p0, &s, &SolverConfig::new(1.0).with_snapshots(11))?;
    let (first, second) = (&traj.snapshots[0], &traj.snapshots[1]);
    let pushed = pushforward_affine(first, second)?;
    println!(
        "push-forward over one snapshot: W1 = {:.6}, mass change = {:.6}",
        w1_distance(&to_density(first)?, &pushed)?,
        l1_distance(&pushed, &to_density(second)?)
    );
    for p in equicontinuity_modulus(&traj, 0.2)? {
        println!("t = {:.1}: modulus / h = {:.4}", p.t, p.total / 0.2);
    }
    Ok(())
}
