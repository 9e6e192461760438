//! Small reference networks used by the examples, tests and the fixture files.

use std::collections::BTreeMap;

use crate::network::{Network, NetworkSpec};

/// Generator - load, `b = 1`, `b_s = 3/16`, `V_0 = 1`, `T = 1`.
/// Equilibria at `r = 0.25` and `r = 0.75`.
pub fn one_load() -> Network {
    one_load_with(3.0 / 16.0)
}

pub fn one_load_with(b_s: f64) -> Network {
    NetworkSpec::default()
        .load(1, b_s, 1.0, 1.0)
        .generator(2, 1.0)
        .line(1, 2, 1.0)
        .build()
        .expect("valid fixture")
}

/// Generator 3 - load 1 - load 2 with unit lines.
pub fn two_load_chain() -> Network {
    NetworkSpec::default()
        .load(1, 0.05, 1.0, 1.0)
        .load(2, 0.05, 1.0, 1.5)
        .generator(3, 1.0)
        .line(3, 1, 1.0)
        .line(1, 2, 1.0)
        .build()
        .expect("valid fixture")
}

/// Two identical loads fed from one generator and tied to each other.
pub fn two_load_symmetric() -> Network {
    NetworkSpec::default()
        .load(1, 0.15, 1.0, 1.0)
        .load(2, 0.15, 1.0, 1.0)
        .generator(3, 1.0)
        .line(3, 1, 1.0)
        .line(3, 2, 1.0)
        .line(1, 2, 0.5)
        .build()
        .expect("valid fixture")
}

/// Three loads in a ring fed from two generators.
pub fn three_load() -> Network {
    NetworkSpec::default()
        .load(1, 0.2, 1.0, 1.0)
        .load(2, 0.12, 1.0, 2.0)
        .load(3, 0.25, 1.02, 1.5)
        .generator(4, 1.0)
        .generator(5, 1.05)
        .line(4, 1, 2.0)
        .line(1, 2, 1.5)
        .line(2, 3, 1.5)
        .line(1, 3, 1.0)
        .line(5, 3, 1.0)
        .build()
        .expect("valid fixture")
}

/// Four loads in a meshed ring, two generators.
pub fn six_bus_mesh() -> Network {
    NetworkSpec::default()
        .load(1, 0.35, 1.0, 1.0)
        .load(2, 0.3, 1.0, 1.2)
        .load(3, 0.4, 1.0, 0.8)
        .load(4, 0.3, 0.98, 1.0)
        .generator(5, 1.02)
        .generator(6, 1.0)
        .line(5, 1, 2.0)
        .line(5, 2, 1.5)
        .line(6, 3, 2.0)
        .line(6, 4, 1.5)
        .line(1, 2, 1.0)
        .line(2, 3, 1.0)
        .line(3, 4, 1.0)
        .line(1, 4, 0.8)
        .build()
        .expect("valid fixture")
}

/// `rows x cols` grid of loads with a generator on every `gen_every`-th bus
/// of the first and last columns. Parameters vary deterministically.
pub fn grid_mesh(rows: usize, cols: usize, gen_every: usize) -> Network {
    let mut spec = NetworkSpec::default();
    let id = |r: usize, c: usize| (r * cols + c + 1) as u32;
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            let b_s = 0.03 + 0.01 * ((k * 7) % 5) as f64;
            let t = 1.0 + 0.25 * (k % 4) as f64;
            spec.load(id(r, c), b_s, 1.0, t);
        }
    }
    let mut gid = (rows * cols + 1) as u32;
    for r in (0..rows).step_by(gen_every.max(1)) {
        for c in [0, cols - 1] {
            spec.generator(gid, 1.0 + 0.01 * (r % 3) as f64);
            spec.line(gid, id(r, c), 3.0);
            gid += 1;
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            if c + 1 < cols {
                spec.line(id(r, c), id(r, c + 1), 2.0 + 0.5 * (k % 3) as f64);
            }
            if r + 1 < rows {
                spec.line(id(r, c), id(r + 1, c), 2.5 + 0.5 * (k % 2) as f64);
            }
        }
    }
    spec.build().expect("valid fixture")
}

/// Column-block assignment for [`grid_mesh`]: loads split into `parts`
/// vertical strips, generators join the strip they touch.
pub fn grid_partition(net: &Network, rows: usize, cols: usize, parts: usize) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    let strip = |c: usize| (c * parts / cols).min(parts - 1);
    for r in 0..rows {
        for c in 0..cols {
            out.insert(r * cols + c, strip(c));
        }
    }
    for l in net.lines() {
        let (g, load) = if l.from >= net.n_load() { (l.from, l.to) } else { (l.to, l.from) };
        if g >= net.n_load() && load < net.n_load() {
            out.insert(g, out[&load]);
        }
    }
    out
}
