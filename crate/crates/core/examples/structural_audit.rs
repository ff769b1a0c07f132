// Audits the congestion-selection inequalities after every accepted step,
// then shows that choosing the congestion factor from the wrong side breaks
// them.

use std::error::Error;

use pbal::diagnostics::integrate_audited;
use pbal::dynamics::{good_v_violations, rhs_with_rule, CongestionRule};
use pbal::scenario::{fn2, Potential, CATALOG};
use pbal::{builtin_catalog, quantile_init, ParticleSystem, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    for name in CATALOG {
        let s = builtin_catalog(name)?;
        let p0 = quantile_init(s.initial.as_ref().unwrap(), 100)?;
        let (_, violations, states) =
            integrate_audited(&p0, &s, &SolverConfig::new(1.0), &[0.25, 0.5])?;
        println!(
            "{name:<22} {states:>5} states, {} violations",
            violations.len()
        );
    }

    let mut s = builtin_catalog("attractive_congested")?;
    s.advection.velocity = fn2(|_, _| 1.0);
    s.potential = Potential::zero();
    let p = ParticleSystem::new(0.0, vec![0.0, 1.0, 1.5], vec![0.2, 0.4])?;
    for rule in [CongestionRule::Downstream, CongestionRule::Upstream] {
        let ev = rhs_with_rule(&p, &s, rule)?;
        let v = good_v_violations(&ev, &s, &[0.5]);
        println!("{rule:?}: {} violations", v.len());
        for x in v.iter().take(3) {
            println!(
                "  {:?} at cell {} (c = {:?}), excess {:.3e}",
                x.family, x.index, x.c, x.excess
            );
        }
    }
    Ok(())
}
