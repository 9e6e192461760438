//! Inner approximation of the region of attraction as a union of cones
//! `{r >= r*(c)}` over directions `c`, projected on the first two loads.

use std::fs::File;

use voltstab::cli::pair_directions;
use voltstab::fixtures;
use voltstab::monitor::{staircase_corners, union_roa, write_corners_csv, DirectionOptions};

fn main() -> voltstab::Result<()> {
    let net = fixtures::two_load_chain();
    let dirs = pair_directions(net.n_load(), 0, 1, 9);
    let witnesses = union_roa(&net, &dirs, &DirectionOptions::default())?;
    for w in &witnesses {
        println!("c = {:?} -> r* = {:?}", w.direction, w.r.as_slice());
    }
    let corners = staircase_corners(&witnesses, 0, 1);
    write_corners_csv(&corners, 0, 1, File::create("roa_union.csv")?)?;
    println!("{} staircase corners written to roa_union.csv", corners.len());
    Ok(())
}
