//! Equilibria of the LTC dynamics: the maximal equilibrium `alpha`, the set
//! `P = {r : V_s(r) >= V_0}`, Jacobians, and a brute-force enumeration oracle
//! for small networks.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::TapState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::monitor;
use crate::network::Network;

/// Slack tolerance for membership in `P`.
pub const P_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates at or below this value mean `P` is empty.
    pub floor: f64,
    /// Newton refinement after the fixed-point iteration stalls.
    pub polish: bool,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions {
            tol: 1e-10,
            max_iter: 100_000,
            floor: 1e-6,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    /// Some eigenvalue has a real part indistinguishable from zero.
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub r_star: TapState,
    /// `max_i |f_i(r*) - r*_i|`.
    pub residual: f64,
    #[serde(with = "complex_list")]
    pub eigenvalues: Vec<Complex<f64>>,
    pub stability: Stability,
}

mod complex_list {
    use nalgebra::Complex;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex<f64>>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?
            .into_iter()
            .map(|[re, im]| Complex::new(re, im))
            .collect())
    }
}

/// `f_i(r) = (E_i - sum_k Z_ik V_0k b_s,k / r_k) / V_0i`.
pub fn fixed_point_map(net: &Network, r: &TapState) -> DVector<f64> {
    let w = DVector::from_fn(net.n_load(), |k, _| {
        net.setpoints()[k] * net.load_susceptances()[k] / r[k]
    });
    (net.e_open() - net.z_open() * w).component_div(net.setpoints())
}

/// Derivative of the fixed-point map, `Z_ik V_0k b_s,k / (V_0i r_k^2)`.
fn map_derivative(net: &Network, r: &DVector<f64>) -> DMatrix<f64> {
    let n = net.n_load();
    DMatrix::from_fn(n, n, |i, k| {
        net.z_open()[(i, k)] * net.setpoints()[k] * net.load_susceptances()[k]
            / (net.setpoints()[i] * r[k] * r[k])
    })
}

/// Iterates `r^{n+1} = f(r^n)` from the upper bound `E / V_0`.
pub struct FixedPointIter<'a> {
    net: &'a Network,
    r: DVector<f64>,
}

impl<'a> FixedPointIter<'a> {
    pub fn new(net: &'a Network) -> Self {
        FixedPointIter {
            net,
            r: net.e_open().component_div(net.setpoints()),
        }
    }
}

impl Iterator for FixedPointIter<'_> {
    type Item = TapState;

    fn next(&mut self) -> Option<TapState> {
        if self.r.min() <= 0.0 {
            return None;
        }
        let out = TapState::from(&self.r);
        self.r = fixed_point_map(self.net, &out);
        Some(out)
    }
}

/// Largest equilibrium, or [`Error::Infeasible`] when none exists.
pub fn find_alpha(net: &Network, opts: &AlphaOptions) -> Result<Equilibrium> {
    let mut r = net.e_open().component_div(net.setpoints());
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = fixed_point_map(net, &TapState::from(&r));
        if next.min() <= opts.floor {
            return Err(Error::Infeasible);
        }
        let drop = &r - &next;
        if drop.min() < -1e-12 * r.amax() {
            return Err(Error::Solver("fixed-point iterates are not monotone".into()));
        }
        r = next;
        if drop.amax() <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Infeasible);
    }
    if opts.polish {
        r = polish(net, r);
    }
    let r = TapState::from(&r);
    classify(net, &r)
}

/// Newton refinement of `g(r) = r - f(r)` from above the root.
///
/// A doubled step is tried first; it recovers quadratic convergence at
/// double roots and is rejected whenever it crosses into `g < 0`.
fn polish(net: &Network, start: DVector<f64>) -> DVector<f64> {
    let n = net.n_load();
    let g = |r: &DVector<f64>| r - fixed_point_map(net, &TapState::from(r));
    let mut r = start;
    let mut gr = g(&r);
    for _ in 0..100 {
        let jm = DMatrix::identity(n, n) - map_derivative(net, &r);
        let Ok(delta) = linalg::solve(&jm, &gr) else {
            break;
        };
        if !delta.iter().all(|d| d.is_finite()) {
            break;
        }
        let mut accepted = false;
        for scale in [2.0, 1.0] {
            let cand = &r - &delta * scale;
            if cand.min() <= 0.0 {
                continue;
            }
            let gc = g(&cand);
            if gc.min() >= -1e-15 * cand.amax() && gc.amax() < gr.amax() {
                r = cand;
                gr = gc;
                accepted = true;
                break;
            }
        }
        if !accepted || delta.amax() <= 1e-16 * r.amax() {
            break;
        }
    }
    r
}

/// Evaluates residual, Jacobian spectrum and stability label at `r`.
pub fn classify(net: &Network, r: &TapState) -> Result<Equilibrium> {
    let residual = (fixed_point_map(net, r) - r.to_dvector()).amax();
    let jac = jacobian(net, r)?;
    let eigenvalues: Vec<Complex<f64>> = jac.complex_eigenvalues().iter().copied().collect();
    let scale = net.time_constants().iter().map(|t| 1.0 / t).fold(0.0, f64::max);
    let stability = stability_of(&eigenvalues, 1e-6 * scale);
    Ok(Equilibrium {
        r_star: r.clone(),
        residual,
        eigenvalues,
        stability,
    })
}

fn stability_of(eigs: &[Complex<f64>], margin: f64) -> Stability {
    if eigs.iter().any(|z| z.re > margin) {
        Stability::Unstable
    } else if eigs.iter().any(|z| z.re.abs() <= margin) {
        Stability::Marginal
    } else {
        Stability::Stable
    }
}

/// Analytic Jacobian of `r' = (V_s(r) - V_0) / T`.
pub fn jacobian(net: &Network, r: &TapState) -> Result<DMatrix<f64>> {
    let n = net.n_load();
    let b = net.b_ll(r)?;
    let fact = linalg::Factorized::new(&b, true)?;
    let v = fact.solve(net.h())?;
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut rhs = DVector::zeros(n);
        rhs[k] = 2.0 * net.load_susceptances()[k] / r[k].powi(3) * v[k];
        let dv = fact.solve(&rhs)?;
        for i in 0..n {
            let mut dvs = dv[i] / r[i];
            if i == k {
                dvs -= v[i] / (r[i] * r[i]);
            }
            jac[(i, k)] = dvs / net.time_constants()[i];
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPWitness {
    pub r: TapState,
    /// `V_s(r) - V_0`.
    pub slack: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    /// `V_0 - V_s(r) > 0`.
    pub shortfall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionCheck {
    InP(RegionPWitness),
    NotInP { violations: Vec<Violation> },
}

impl RegionCheck {
    pub fn is_in(&self) -> bool {
        matches!(self, RegionCheck::InP(_))
    }
}

pub fn in_region_p(net: &Network, r: &TapState) -> Result<RegionCheck> {
    in_region_p_tol(net, r, P_TOL)
}

pub fn in_region_p_tol(net: &Network, r: &TapState, tol: f64) -> Result<RegionCheck> {
    let v = net.load_voltages(r)?;
    let slack: Vec<f64> = (&v.secondary - net.setpoints()).iter().copied().collect();
    let violations: Vec<Violation> = slack
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < -tol)
        .map(|(index, s)| Violation { index, shortfall: -s })
        .collect();
    Ok(if violations.is_empty() {
        RegionCheck::InP(RegionPWitness { r: r.clone(), slack })
    } else {
        RegionCheck::NotInP { violations }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoaStatus {
    /// `witness` lies in `P` and below `r0`, so `r0` is in the region of attraction.
    Certified { witness: RegionPWitness },
    /// The sufficient condition failed; this is not a proof of instability.
    Unknown,
}

/// Sufficient ROA test via the monitoring problem.
pub fn roa_membership(net: &Network, r0: &TapState) -> Result<RoaStatus> {
    match monitor::certify_stability(net, r0)? {
        monitor::Certificate::Stable { witness, .. } => Ok(RoaStatus::Certified { witness }),
        monitor::Certificate::NeedsSupport { .. } => Ok(RoaStatus::Unknown),
    }
}

/// Upper limit on grid cells scanned by [`brute_force_equilibria`].
pub const BRUTE_FORCE_CELL_LIMIT: u64 = 2_000_000;

/// Default search box `[lo, E_i / V_0,i]`; every equilibrium lies strictly inside.
pub fn default_box(net: &Network, lo: f64) -> Vec<(f64, f64)> {
    net.e_open()
        .component_div(net.setpoints())
        .iter()
        .map(|hi| (lo, *hi))
        .collect()
}

/// Grid scan of `g(r) = r - f(r)` followed by damped Newton refinement.
///
/// Every cell whose corners show a sign change in each component of `g`
/// seeds a Newton solve; converged roots are merged and sorted.
pub fn brute_force_equilibria(
    net: &Network,
    bounds: &[(f64, f64)],
    grid_density: usize,
    refine_tol: f64,
) -> Result<Vec<Equilibrium>> {
    let n = net.n_load();
    if bounds.len() != n {
        return Err(Error::DimensionMismatch("search box".into()));
    }
    if bounds.iter().any(|(lo, hi)| !(*lo > 0.0 && hi > lo)) {
        return Err(Error::InvalidNetwork("search box must lie in the positive orthant".into()));
    }
    let g = grid_density.max(2);
    let cells = (g as u64 - 1).checked_pow(n as u32).unwrap_or(u64::MAX);
    if cells > BRUTE_FORCE_CELL_LIMIT {
        return Err(Error::BoxTooLarge {
            cells,
            limit: BRUTE_FORCE_CELL_LIMIT,
        });
    }
    let axis = |d: usize, j: usize| bounds[d].0 + (bounds[d].1 - bounds[d].0) * j as f64 / (g - 1) as f64;
    let nodes = g.pow(n as u32);
    let coords = |mut idx: usize| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let c = idx % g;
                idx /= g;
                c
            })
            .collect()
    };
    let residual_at = |c: &[usize]| -> DVector<f64> {
        let r = DVector::from_fn(n, |d, _| axis(d, c[d]));
        &r - fixed_point_map(net, &TapState::from(&r))
    };
    let values: Vec<DVector<f64>> = (0..nodes).map(|i| residual_at(&coords(i))).collect();
    let flat = |c: &[usize]| c.iter().rev().fold(0, |acc, &x| acc * g + x);

    let mut roots: Vec<DVector<f64>> = Vec::new();
    let mut push_root = |x: DVector<f64>| {
        if !roots.iter().any(|y| (y - &x).amax() <= 1e-7 * (1.0 + x.amax())) {
            roots.push(x);
        }
    };
    let cell_count = (g - 1).pow(n as u32);
    for cell in 0..cell_count {
        let base: Vec<usize> = {
            let mut idx = cell;
            (0..n)
                .map(|_| {
                    let c = idx % (g - 1);
                    idx /= g - 1;
                    c
                })
                .collect()
        };
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for corner in 0..(1usize << n) {
            let c: Vec<usize> = (0..n).map(|d| base[d] + ((corner >> d) & 1)).collect();
            let v = &values[flat(&c)];
            for d in 0..n {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        if (0..n).all(|d| lo[d] <= 0.0 && hi[d] >= 0.0) {
            let start = DVector::from_fn(n, |d, _| 0.5 * (axis(d, base[d]) + axis(d, base[d] + 1)));
            if let Some(x) = newton_root(net, start, refine_tol) {
                let inside = (0..n).all(|d| x[d] >= bounds[d].0 - 1e-9 && x[d] <= bounds[d].1 + 1e-9);
                if inside {
                    push_root(x);
                }
            }
        }
    }
    roots.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    roots
        .into_iter()
        .map(|x| classify(net, &TapState::from(&x)))
        .collect()
}

/// Damped Newton on `r - f(r)`; each step is capped at half of every component.
fn newton_root(net: &Network, mut r: DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let n = net.n_load();
    let g = |r: &DVector<f64>| r - fixed_point_map(net, &TapState::from(r));
    let mut gr = g(&r);
    for _ in 0..200 {
        if gr.amax() <= tol {
            return Some(r);
        }
        let jm = DMatrix::identity(n, n) - map_derivative(net, &r);
        let delta = linalg::solve(&jm, &gr).ok()?;
        let cap = (0..n)
            .map(|i| 0.5 * r[i] / delta[i].abs().max(f64::MIN_POSITIVE))
            .fold(1.0, f64::min);
        let mut step = cap;
        let mut moved = false;
        for _ in 0..40 {
            let cand = &r - &delta * step;
            if cand.min() > 0.0 {
                let gc = g(&cand);
                if gc.amax() < gr.amax() {
                    r = cand;
                    gr = gc;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            return None;
        }
    }
    (gr.amax() <= tol).then_some(r)
}
