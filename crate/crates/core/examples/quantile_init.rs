// Equal-mass quantile initialisation of a smooth profile and its L1
// reconstruction error.

use std::error::Error;

use pbal::density::{l1_distance, to_density, PiecewiseDensity};
use pbal::{quantile_init, InitialDensity};

fn main() -> Result<(), Box<dyn Error>> {
    let rho0 = InitialDensity::expression("0.75 * (1 - x^2)", -1.0, 1.0)?;
    // fine reference reconstruction of the exact profile
    let m = 20_000;
    let xs: Vec<f64> = (0..=m).map(|k| -1.0 + 2.0 * k as f64 / m as f64).collect();
    let hs: Vec<f64> = xs
        .windows(2)
        .map(|w| rho0.value_at(0.5 * (w[0] + w[1])))
        .collect();
    let fine = PiecewiseDensity::new(xs, hs)?;

    println!("{:>6} {:>12} {:>12}", "N", "cell mass", "L1 error");
    for n in [10, 20, 40, 80, 160] {
        let p = quantile_init(&rho0, n)?;
        println!(
            "{n:>6} {:>12.4e} {:>12.4e}",
            p.q[0],
            l1_distance(&to_density(&p)?, &fine)
        );
    }
    Ok(())
}
