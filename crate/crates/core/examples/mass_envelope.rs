// Linear growth `f = rho` saturates the mass envelope `q(0) Q(t)`.

use std::error::Error;

use pbal::diagnostics::{envelope_q, envelopes, EnvelopeInputs};
use pbal::{builtin_catalog, integrate, quantile_init, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let s = builtin_catalog("growth_transport")?;
    let p0 = quantile_init(s.initial.as_ref().unwrap(), 100)?;
    let traj = integrate(&p0, &s, &SolverConfig::new(1.0))?;
    let env = envelopes(&s, &EnvelopeInputs::from_state(&p0)?, 1.0, &traj.times());

    let q0 = p0.total_mass();
    println!("{:>6} {:>14} {:>14} {:>10}", "t", "mass", "q0 Q(t)", "S(t)");
    for p in &traj.snapshots {
        println!(
            "{:>6.2} {:>14.10} {:>14.10} {:>10.4}",
            p.t,
            p.total_mass(),
            q0 * envelope_q(&s, p.t),
            env.s.eval(p.t)
        );
    }
    Ok(())
}
