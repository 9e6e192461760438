//! Consensus ADMM over a two-agent split of the six-bus mesh, compared with
//! the centralized solution.

use std::collections::BTreeMap;
use std::fs::File;

use voltstab::admm::{build_partition, run, AdmmOptions};
use voltstab::dynamics::TapState;
use voltstab::fixtures;
use voltstab::monitor::certify_stability;

fn main() -> voltstab::Result<()> {
    let net = fixtures::six_bus_mesh();
    let r0 = TapState::uniform(net.n_load(), 0.25);
    let assignment: BTreeMap<usize, usize> = [(0, 0), (1, 0), (2, 1), (3, 1)].into_iter().collect();
    let part = build_partition(&net, &assignment)?;
    println!("boundary buses: {:?}", part.boundary);

    let report = run(&net, &r0, &part, &AdmmOptions::default())?;
    let central = certify_stability(&net, &r0)?.cost();
    println!(
        "{:?} after {} rounds: objective {:.9}, centralized {:.9}",
        report.verdict,
        report.iterations,
        report.objective(),
        central
    );
    report.write_history_csv(File::create("admm_history.csv")?)?;
    Ok(())
}
