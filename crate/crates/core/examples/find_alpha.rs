//! Monotone fixed-point iteration for the largest equilibrium, compared with
//! an exhaustive grid search for all equilibria.

use voltstab::equilibria::{brute_force_equilibria, default_box, find_alpha, AlphaOptions, FixedPointIter};
use voltstab::fixtures;

fn main() -> voltstab::Result<()> {
    let net = fixtures::two_load_symmetric();
    for (k, r) in FixedPointIter::new(&net).take(5).enumerate() {
        println!("iterate {k}: {:?}", r.as_slice());
    }
    let alpha = find_alpha(&net, &AlphaOptions::default())?;
    println!("alpha = {:?} ({:?})", alpha.r_star.as_slice(), alpha.stability);

    let all = brute_force_equilibria(&net, &default_box(&net, 0.02), 200, 1e-12)?;
    for eq in &all {
        let re: Vec<f64> = eq.eigenvalues.iter().map(|c| c.re).collect();
        println!("equilibrium {:?}: eigenvalue real parts {re:?}", eq.r_star.as_slice());
    }

    for b_s in [3.0 / 16.0, 0.25, 0.3] {
        let one = fixtures::one_load_with(b_s);
        match find_alpha(&one, &AlphaOptions::default()) {
            Ok(eq) => println!("one load, b_s = {b_s}: alpha = {:.9}", eq.r_star[0]),
            Err(e) => println!("one load, b_s = {b_s}: {e}"),
        }
    }
    Ok(())
}
