// Checks every snapshot of a congested attractive run against the mass,
// support, density and total-variation envelopes.

use std::error::Error;

use pbal::diagnostics::{check_bounds, envelopes, EnvelopeInputs};
use pbal::{builtin_catalog, integrate, quantile_init, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    for name in ["attractive_congested", "repulsive_source"] {
        let s = builtin_catalog(name)?;
        let p0 = quantile_init(s.initial.as_ref().unwrap(), 200)?;
        let traj = integrate(&p0, &s, &SolverConfig::new(1.0).with_snapshots(6))?;
        let env = envelopes(&s, &EnvelopeInputs::from_state(&p0)?, 1.0, &traj.times());
        let rep = check_bounds(&traj, &env, 1e-6)?;

        println!("{name}");
        println!(
            "{:>5} {:>9} {:>9} {:>9} {:>9} {:>7} {:>8}",
            "t", "support", "S(t)", "max rho", "R(t)", "TV", "margin"
        );
        for b in &rep.snapshots {
            let support = b.x_right.max(-b.x_left);
            println!(
                "{:>5.2} {:>9.4} {:>9.4} {:>9.4} {:>9.3e} {:>7.4} {:>8.3}",
                b.t,
                support,
                b.support_bound,
                b.max_density,
                b.density_bound,
                b.total_variation,
                b.margin
            );
        }
        println!("all bounds hold: {}\n", rep.all_ok);
    }
    Ok(())
}
