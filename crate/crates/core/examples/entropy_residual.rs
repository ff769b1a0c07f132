// Negative part of the discrete entropy residual over the default family
// of test functions and levels; it shrinks roughly like 1/N.

use std::error::Error;

use pbal::diagnostics::{default_entropy_residual, PhiGrid, DEFAULT_C_FRACTIONS};
use pbal::{builtin_catalog, integrate, quantile_init, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let s = builtin_catalog("attractive_congested")?;
    let cfg = SolverConfig::new(1.0).with_snapshots(513);
    let mut prev: Option<f64> = None;
    println!("{:>6} {:>12} {:>8}", "N", "res-", "ratio");
    for n in [50, 100, 200] {
        let traj = integrate(&quantile_init(s.initial.as_ref().unwrap(), n)?, &s, &cfg)?;
        let rep = default_entropy_residual(&traj, &s, PhiGrid::default(), &DEFAULT_C_FRACTIONS)?;
        let ratio = prev.map_or("-".into(), |p| format!("{:.3}", rep.res_minus / p));
        println!("{n:>6} {:>12.4e} {ratio:>8}", rep.res_minus);
        prev = Some(rep.res_minus);
    }
    Ok(())
}
