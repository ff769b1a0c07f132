// A scenario written as a TOML document: parsed, checked against the model
// assumptions on a sample grid, then run.

use std::error::Error;
use std::path::Path;

use pbal::scenario::{parse_scenario, sample_grid, scenario_validate};
use pbal::{integrate, quantile_init, SolverConfig};

const SCENARIO: &str = r#"
[metadata]
name = "drift_into_wall"
description = "rightward drift slowed by congestion"
branch = "v_decays"

[congestion]
v = "max(1 - r, 0)^2"
v_sup = 1
vprime_bound = 2
decay_g = "2 * r"

[advection]
V = "1 - x / 4"
dxV = -0.25
F = 2
G = "1 + r"
lambda = 1

[potential]
W = "x^2 / 2"
dxW_neg = "x"
dxW_pos = "x"
dx2W = 1
atom_w = 0

[initial]
expr = "0.5 + 0.3 * x^3"
support = [-1, 1]
"#;

fn main() -> Result<(), Box<dyn Error>> {
    let s = parse_scenario(SCENARIO, Path::new("."))?;
    let violations = scenario_validate(&s, &sample_grid((0.0, 1.0), (-3.0, 3.0), (0.0, 1.0), 12));
    println!(
        "{}: {} assumption violations on the sample grid",
        s.name,
        violations.len()
    );
    for v in violations.iter().take(5) {
        println!(
            "  {:?} at (t, x, r) = ({}, {}, {}): {} > {}",
            v.kind, v.t, v.x, v.rho, v.lhs, v.rhs
        );
    }

    let p0 = quantile_init(s.initial.as_ref().unwrap(), 100)?;
    let traj = integrate(&p0, &s, &SolverConfig::new(1.0).with_snapshots(5))?;
    for p in &traj.snapshots {
        println!(
            "t = {:.2}: support [{:.4}, {:.4}]",
            p.t,
            p.x[0],
            p.x[p.x.len() - 1]
        );
    }
    Ok(())
}
