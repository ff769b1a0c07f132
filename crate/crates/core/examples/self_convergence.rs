// Space-time L1 distance between runs with N and 2N particles.

use std::error::Error;

use pbal::cli::sweep_table;
use pbal::scenario::CATALOG;
use pbal::{builtin_catalog, SolverConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let cfg = SolverConfig::new(1.0).with_snapshots(11);
    for name in CATALOG {
        let s = builtin_catalog(name)?;
        let rows = sweep_table(&s, &[50, 100, 200, 400], &cfg)?;
        let cells: Vec<String> = rows
            .iter()
            .map(|r| format!("{}->{}: {:.3e}", r.n_coarse, r.n_fine, r.distance))
            .collect();
        println!("{name:<22} {}", cells.join("  "));
    }
    Ok(())
}
