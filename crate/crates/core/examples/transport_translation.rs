// Pure transport at unit speed: the particle density at `t = 1` is the
// initial step shifted by one, up to the quantisation of the initial datum.

use std::error::Error;

use pbal::density::{l1_distance, to_density, PiecewiseDensity};
use pbal::{builtin_catalog, integrate, quantile_init, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let s = builtin_catalog("transport")?;
    let rho0 = s
        .initial
        .as_ref()
        .expect("catalog scenarios carry an initial density");
    let exact = PiecewiseDensity::new(vec![0.0, 1.0, 5.0], vec![1.0, 0.5])?;

    println!("{:>6} {:>12} {:>8}", "N", "L1 error", "steps");
    for n in [25, 50, 100, 200] {
        let p0 = quantile_init(rho0, n)?;
        let traj = integrate(&p0, &s, &SolverConfig::new(1.0).with_snapshots(2))?;
        let err = l1_distance(&to_density(traj.last())?, &exact);
        println!("{n:>6} {err:>12.4e} {:>8}", traj.stats.accepted);
    }
    Ok(())
}
