//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voltstab::dynamics::TapState;
use voltstab::network::{Network, NetworkSpec};

/// Both roots of `V0 b r^2 - b E r + V0 b_s = 0`, the equilibria of a load
/// fed from a generator of voltage `e` through a line of susceptance `b`.
pub fn one_load_equilibria(e: f64, b: f64, b_s: f64, v0: f64) -> Option<(f64, f64)> {
    let disc = b * b * e * e - 4.0 * v0 * v0 * b * b_s;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((b * e - s) / (2.0 * v0 * b), (b * e + s) / (2.0 * v0 * b)))
}

/// Minimum of `(b V + b_s u - h)^2` over `u >= V / r0^2`, `u V >= v0^2`,
/// `V >= 0` for a single load, by scanning `V` and refining with golden
/// section. Returns `(residual, V, u)`.
pub fn one_load_support_oracle(b: f64, b_s: f64, h: f64, v0: f64, r0: f64) -> (f64, f64, f64) {
    let u_min = |v: f64| (v / (r0 * r0)).max(v0 * v0 / v);
    let resid = |v: f64| (b * v + b_s * u_min(v) - h).abs();
    let mut best = (f64::INFINITY, 0.0);
    let n = 200_000;
    let hi = 2.0 * h / b;
    for k in 1..=n {
        let v = hi * k as f64 / n as f64;
        let r = resid(v);
        if r < best.0 {
            best = (r, v);
        }
    }
    let step = hi / n as f64;
    let (mut lo, mut up) = ((best.1 - step).max(1e-12), best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = up - g * (up - lo);
        let c = lo + g * (up - lo);
        if resid(a) < resid(c) {
            up = c;
        } else {
            lo = a;
        }
    }
    let v = 0.5 * (lo + up);
    (resid(v), v, u_min(v))
}

/// Central finite differences of `f` at `x`.
pub fn finite_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform tap vectors in `[lo, hi]^n`.
pub fn sample_taps(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> TapState {
    TapState::new((0..n).map(|_| rng.random_range(lo..hi)).collect())
}

/// Random connected network with `n_load` loads in a tree plus extra ties
/// and `n_gen` generators each feeding one load.
pub fn random_network(seed: u64, n_load: usize, n_gen: usize, b_s_max: f64) -> Network {
    let mut rng = rng(seed);
    let mut spec = NetworkSpec::default();
    for i in 0..n_load {
        spec.load(
            i as u32 + 1,
            rng.random_range(0.01..b_s_max),
            rng.random_range(0.95..1.05),
            rng.random_range(0.5..2.0),
        );
    }
    for g in 0..n_gen {
        let id = (n_load + g) as u32 + 1;
        spec.generator(id, rng.random_range(0.98..1.08));
        let to = rng.random_range(0..n_load) as u32 + 1;
        spec.line(id, to, rng.random_range(1.0..4.0));
    }
    for i in 1..n_load {
        let parent = rng.random_range(0..i) as u32 + 1;
        spec.line(parent, i as u32 + 1, rng.random_range(0.5..3.0));
    }
    for _ in 0..n_load / 2 {
        let a = rng.random_range(0..n_load);
        let b = rng.random_range(0..n_load);
        if a != b {
            spec.line(a as u32 + 1, b as u32 + 1, rng.random_range(0.5..2.0));
        }
    }
    spec.build().expect("random network is valid")
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs())).unwrap();
        m.swap_rows(col, piv);
        inv.swap_rows(col, piv);
        let d = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                for j in 0..n {
                    m[(i, j)] -= f * m[(col, j)];
                    inv[(i, j)] -= f * inv[(col, j)];
                }
            }
        }
    }
    inv
}
