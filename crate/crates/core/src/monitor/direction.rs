//! Minimal points of `P` along weighted directions, and the union of the
//! resulting cones as an inner approximation of the region of attraction.
//!
//! The search runs in load-voltage space, where `P` is convex: with
//! `u(V) = (h - B~ V) / b_s` the constraints read `u_i V_i >= V_0i^2`, and
//! `r_i = sqrt(V_i / u_i)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cli::output::fmt_num;
use crate::dynamics::TapState;
use crate::equilibria::{self, AlphaOptions, RegionCheck};
use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionOptions {
    pub outer_iter: usize,
    pub inner_iter: usize,
    /// Target constraint violation of the augmented Lagrangian.
    pub feas_tol: f64,
    pub grad_tol: f64,
}

impl Default for DirectionOptions {
    fn default() -> Self {
        DirectionOptions {
            outer_iter: 60,
            inner_iter: 500,
            feas_tol: 1e-12,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaWitness {
    /// Normalized direction (`sum c = 1`).
    pub direction: Vec<f64>,
    pub r: TapState,
    pub objective: f64,
}

struct Model<'a> {
    net: &'a Network,
    c: DVector<f64>,
}

impl Model<'_> {
    fn u(&self, v: &DVector<f64>) -> DVector<f64> {
        (self.net.h() - self.net.b_tilde() * v).component_div(self.net.load_susceptances())
    }

    fn in_domain(&self, v: &DVector<f64>) -> bool {
        v.iter().all(|x| *x > 0.0) && self.u(v).iter().all(|x| *x > 0.0)
    }

    fn taps(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_div(&self.u(v)).map(f64::sqrt)
    }

    fn objective(&self, v: &DVector<f64>) -> f64 {
        self.c.dot(&self.taps(v))
    }

    fn objective_grad(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = v.len();
        let r = self.taps(v);
        let rest = self.net.h() - self.net.b_tilde() * v;
        let mut g = DVector::zeros(n);
        for i in 0..n {
            let w = 0.5 * self.c[i] * r[i];
            g[i] += w / v[i];
            for k in 0..n {
                g[k] += w * self.net.b_tilde()[(i, k)] / rest[i];
            }
        }
        g
    }

    /// `c_i(V) = 1 - u_i V_i / V_0i^2 <= 0`.
    fn constraints(&self, v: &DVector<f64>) -> DVector<f64> {
        let u = self.u(v);
        DVector::from_fn(v.len(), |i, _| {
            let v0 = self.net.setpoints()[i];
            1.0 - u[i] * v[i] / (v0 * v0)
        })
    }

    fn constraint_jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let n = v.len();
        let u = self.u(v);
        DMatrix::from_fn(n, n, |i, k| {
            let v0 = self.net.setpoints()[i];
            let b = self.net.load_susceptances()[i];
            let mut d = v[i] * self.net.b_tilde()[(i, k)] / b;
            if i == k {
                d -= u[i];
            }
            d / (v0 * v0)
        })
    }
}

fn augmented(m: &Model, v: &DVector<f64>, lambda: &DVector<f64>, rho: f64) -> (f64, DVector<f64>) {
    let c = m.constraints(v);
    let jac = m.constraint_jacobian(v);
    let mut val = m.objective(v);
    let mut grad = m.objective_grad(v);
    for i in 0..c.len() {
        let s = (lambda[i] + rho * c[i]).max(0.0);
        val += (s * s - lambda[i] * lambda[i]) / (2.0 * rho);
        grad += jac.row(i).transpose() * s;
    }
    (val, grad)
}

/// BFGS with an Armijo line search that never leaves the domain.
fn minimize_inner(
    m: &Model,
    mut v: DVector<f64>,
    lambda: &DVector<f64>,
    rho: f64,
    opts: &DirectionOptions,
) -> Result<DVector<f64>> {
    let n = v.len();
    let mut hinv = DMatrix::identity(n, n) * 1e-3;
    let (mut f, mut g) = augmented(m, &v, lambda, rho);
    for _ in 0..opts.inner_iter {
        if g.amax() <= opts.grad_tol {
            break;
        }
        let mut d = -(&hinv * &g);
        if d.dot(&g) >= 0.0 {
            hinv = DMatrix::identity(n, n) * (1e-3 / (1.0 + g.amax()));
            d = -(&hinv * &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let cand = &v + &d * step;
            if m.in_domain(&cand) {
                let (fc, gc) = augmented(m, &cand, lambda, rho);
                if fc <= f + 1e-4 * step * g.dot(&d) {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            if g.amax() <= 1e-6 {
                break;
            }
            // Restart from a scaled gradient step before giving up.
            if hinv[(0, 0)] != 1e-6 {
                hinv = DMatrix::identity(n, n) * 1e-6;
                continue;
            }
            return Err(Error::LocalSolveFailed("line search stalled".into()));
        };
        let s = &cand - &v;
        let y = &gc - &g;
        let sy = s.dot(&y);
        if sy > 1e-16 * s.norm() * y.norm() {
            let rho_b = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - &s * y.transpose() * rho_b;
            let right = &i - &y * s.transpose() * rho_b;
            hinv = &left * &hinv * &right + &s * s.transpose() * rho_b;
        }
        let small = (f - fc).abs() <= 1e-16 * (1.0 + f.abs()) && s.amax() <= 1e-15;
        v = cand;
        f = fc;
        g = gc;
        if small {
            break;
        }
    }
    Ok(v)
}

/// Minimizes `c . r` over `P` starting from `alpha`.
pub fn roa_direction_opt(net: &Network, c: &[f64], opts: &DirectionOptions) -> Result<RoaWitness> {
    let n = net.n_load();
    if c.len() != n {
        return Err(Error::DimensionMismatch("direction length".into()));
    }
    let sum: f64 = c.iter().sum();
    if c.iter().any(|x| !(*x >= 0.0)) || !(sum > 0.0) {
        return Err(Error::InvalidNetwork("direction must be nonnegative and nonzero".into()));
    }
    let c = DVector::from_iterator(n, c.iter().map(|x| x / sum));
    let alpha = equilibria::find_alpha(net, &AlphaOptions::default())?;
    let v_alpha = net.load_voltages(&alpha.r_star)?.primary;
    let m = Model { net, c: c.clone() };

    let mut v = v_alpha.clone();
    let mut lambda = DVector::zeros(n);
    let mut rho = 10.0;
    let mut last_viol = f64::INFINITY;
    for _ in 0..opts.outer_iter {
        v = minimize_inner(&m, v, &lambda, rho, opts)?;
        let cons = m.constraints(&v);
        let viol = cons.iter().fold(0.0f64, |a, x| a.max(*x));
        lambda = DVector::from_fn(n, |i, _| (lambda[i] + rho * cons[i]).max(0.0));
        if viol <= opts.feas_tol {
            break;
        }
        if viol > 0.25 * last_viol {
            rho = (rho * 10.0).min(1e12);
        }
        last_viol = viol;
    }
    let v = restore(&m, &v_alpha, &v);
    let r = TapState::from(&m.taps(&v));
    match equilibria::in_region_p_tol(net, &r, 1e-8)? {
        RegionCheck::InP(_) => {}
        RegionCheck::NotInP { violations } => {
            return Err(Error::LocalSolveFailed(format!(
                "result leaves P (shortfall {:e})",
                violations.iter().map(|v| v.shortfall).fold(0.0, f64::max)
            )))
        }
    }
    Ok(RoaWitness {
        direction: c.iter().copied().collect(),
        objective: m.objective(&v),
        r,
    })
}

/// Largest step from `V(alpha)` toward `target` that stays in the convex
/// feasible set.
fn restore(m: &Model, from: &DVector<f64>, target: &DVector<f64>) -> DVector<f64> {
    let ok = |v: &DVector<f64>| m.in_domain(v) && m.constraints(v).iter().all(|x| *x <= 0.0);
    if ok(target) {
        return target.clone();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(&(from + (target - from) * mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    from + (target - from) * lo
}

/// One witness per direction.
pub fn union_roa(net: &Network, directions: &[Vec<f64>], opts: &DirectionOptions) -> Result<Vec<RoaWitness>> {
    if directions.is_empty() {
        return Err(Error::InvalidNetwork("at least one direction is required".into()));
    }
    directions.iter().map(|c| roa_direction_opt(net, c, opts)).collect()
}

/// Corners of the staircase bounding `union_k {r >= r_k}` projected on `(i, j)`.
pub fn staircase_corners(witnesses: &[RoaWitness], i: usize, j: usize) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = witnesses.iter().map(|w| (w.r[i], w.r[j])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut front: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if front.last().is_none_or(|q| p.1 < q.1) {
            front.push(p);
        }
    }
    let mut out = Vec::with_capacity(2 * front.len());
    for (k, p) in front.iter().enumerate() {
        if k > 0 {
            out.push((p.0, front[k - 1].1));
        }
        out.push(*p);
    }
    out
}

pub fn write_corners_csv<W: Write>(corners: &[(f64, f64)], i: usize, j: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([format!("r_{}", i + 1), format!("r_{}", j + 1)])?;
    for (a, b) in corners {
        out.write_record([fmt_num(*a), fmt_num(*b)])?;
    }
    out.flush()?;
    Ok(())
}
