//! Dense log-barrier solver for least-squares problems with hyperbolic
//! (rotated second-order cone) and linear inequality constraints:
//!
//! ```text
//! minimize    ||A x - b||^2
//! subject to  x_u x_v >= k^2,  x_u, x_v > 0   (each hyperbolic pair)
//!             G x <= g
//!             x >= lower
//! ```
//!
//! Infeasible starting points go through a phase-1 problem that shifts every
//! constraint by a common slack `s` and minimizes it.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x[u] * x[v] >= k^2` with both factors positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperbolic {
    pub u: usize,
    pub v: usize,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub hyperbolic: Vec<Hyperbolic>,
    /// Rows of `G x <= g`.
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    /// Entries may be `-inf`.
    pub lower: DVector<f64>,
}

impl ConicProblem {
    /// Unconstrained least squares `||A x - b||^2`.
    pub fn least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let n = a.ncols();
        ConicProblem {
            a,
            b,
            hyperbolic: Vec::new(),
            ineq: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.a.ncols()
    }

    pub fn add_hyperbolic(&mut self, u: usize, v: usize, k: f64) -> &mut Self {
        self.hyperbolic.push(Hyperbolic { u, v, k });
        self
    }

    /// Appends the row `coeffs . x <= rhs`.
    pub fn add_ineq(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> &mut Self {
        let n = self.n_vars();
        let m = self.ineq.nrows();
        let mut g = self.ineq.clone().resize(m + 1, n, 0.0);
        for &(j, c) in coeffs {
            g[(m, j)] += c;
        }
        self.ineq = g;
        self.ineq_rhs = self.ineq_rhs.clone().push(rhs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.b.len() != self.a.nrows() {
            return Err(Error::DimensionMismatch("objective A and b".into()));
        }
        if self.ineq.ncols() != n || self.ineq.nrows() != self.ineq_rhs.len() {
            return Err(Error::DimensionMismatch("linear constraints".into()));
        }
        if self.lower.len() != n {
            return Err(Error::DimensionMismatch("lower bounds".into()));
        }
        for h in &self.hyperbolic {
            if h.u >= n || h.v >= n || h.u == h.v {
                return Err(Error::DimensionMismatch(format!(
                    "hyperbolic constraint on ({}, {}) with {n} variables",
                    h.u, h.v
                )));
            }
            if !(h.k >= 0.0) {
                return Err(Error::Solver(format!("hyperbolic constant must be >= 0 (got {})", h.k)));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).norm_squared()
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for h in &self.hyperbolic {
            let (p, q) = (x[h.u], x[h.v]);
            worst = worst.max(-p).max(-q).max(h.k * h.k - p * q);
        }
        if self.ineq.nrows() > 0 {
            let r = &self.ineq * x - &self.ineq_rhs;
            worst = worst.max(r.max());
        }
        for (xi, li) in x.iter().zip(self.lower.iter()) {
            worst = worst.max(li - xi);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub mu: f64,
    pub objective: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub status: ConicStatus,
    /// Newton steps taken in the main phase.
    pub iterations: usize,
    /// Multipliers of the linear rows, then of the finite lower bounds.
    pub linear_duals: DVector<f64>,
    /// Multipliers of the hyperbolic constraints written as `k^2 - x_u x_v <= 0`.
    pub hyperbolic_duals: DVector<f64>,
    pub trace: Vec<TraceRow>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == ConicStatus::Optimal
    }

    /// Writes the iterate trace as `iter,mu,objective,kkt_residual`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.trace {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicOptions {
    /// Target duality gap and KKT residual.
    pub tol: f64,
    /// Newton step budget of the main phase (phase 1 has its own).
    pub max_iter: usize,
    /// Optional starting point; phase 1 runs if it is not strictly feasible.
    pub x0: Option<DVector<f64>>,
    pub trace: bool,
}

impl Default for ConicOptions {
    fn default() -> Self {
        ConicOptions {
            tol: 1e-8,
            max_iter: 200,
            x0: None,
            trace: false,
        }
    }
}

impl ConicOptions {
    pub fn with_tol(tol: f64) -> Self {
        ConicOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Sparse affine expression `c . y + constant`.
#[derive(Debug, Clone)]
struct Affine {
    coef: Vec<(usize, f64)>,
    constant: f64,
}

impl Affine {
    fn eval(&self, y: &DVector<f64>) -> f64 {
        self.constant + self.eval_linear(y)
    }

    fn eval_linear(&self, y: &DVector<f64>) -> f64 {
        self.coef.iter().map(|(j, c)| c * y[*j]).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
struct HypTerm {
    p: Affine,
    q: Affine,
    k2: f64,
}

/// `min 0.5 y'Py + q'y` over the interior of the hyperbolic and linear constraints.
#[derive(Debug, Clone)]
struct Form {
    p: DMatrix<f64>,
    q: DVector<f64>,
    constant: f64,
    hyp: Vec<HypTerm>,
    g: DMatrix<f64>,
    gr: DVector<f64>,
}

impl Form {
    fn nu(&self) -> f64 {
        2.0 * self.hyp.len() as f64 + self.g.nrows() as f64
    }

    fn objective(&self, y: &DVector<f64>) -> f64 {
        0.5 * y.dot(&(&self.p * y)) + self.q.dot(y) + self.constant
    }

    fn slacks(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.gr - &self.g * y
    }

    fn strictly_feasible(&self, y: &DVector<f64>) -> bool {
        if self.slacks(y).iter().any(|s| !(*s > 0.0)) {
            return false;
        }
        self.hyp.iter().all(|h| {
            let (p, q) = (h.p.eval(y), h.q.eval(y));
            p > 0.0 && q > 0.0 && p.mul_add(q, -h.k2) > 0.0
        })
    }

    /// Barrier value; `None` outside the interior.
    fn barrier(&self, y: &DVector<f64>) -> Option<f64> {
        let mut phi = 0.0;
        for s in self.slacks(y).iter() {
            if !(*s > 0.0) {
                return None;
            }
            phi -= s.ln();
        }
        for h in &self.hyp {
            let (p, q) = (h.p.eval(y), h.q.eval(y));
            let w = p.mul_add(q, -h.k2);
            if !(p > 0.0 && q > 0.0 && w > 0.0) {
                return None;
            }
            phi -= w.ln();
        }
        Some(phi)
    }

    /// Gradient and Hessian of the barrier.
    fn barrier_derivatives(&self, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = y.len();
        let s = self.slacks(y);
        let inv = s.map(|v| 1.0 / v);
        let mut grad = self.g.transpose() * &inv;
        let scaled = DMatrix::from_fn(self.g.nrows(), n, |i, j| self.g[(i, j)] * inv[i]);
        let mut hess = scaled.transpose() * &scaled;
        for h in &self.hyp {
            let (p, q) = (h.p.eval(y), h.q.eval(y));
            let w = p.mul_add(q, -h.k2);
            // d/dp, d/dq of -log(pq - k^2) and its 2x2 Hessian in (p, q).
            let gp = -q / w;
            let gq = -p / w;
            let hpp = q * q / (w * w);
            let hqq = p * p / (w * w);
            let hpq = h.k2 / (w * w);
            for &(i, ci) in &h.p.coef {
                grad[i] += gp * ci;
            }
            for &(i, ci) in &h.q.coef {
                grad[i] += gq * ci;
            }
            for &(i, ci) in &h.p.coef {
                for &(j, cj) in &h.p.coef {
                    hess[(i, j)] += hpp * ci * cj;
                }
                for &(j, cj) in &h.q.coef {
                    hess[(i, j)] += hpq * ci * cj;
                    hess[(j, i)] += hpq * ci * cj;
                }
            }
            for &(i, ci) in &h.q.coef {
                for &(j, cj) in &h.q.coef {
                    hess[(i, j)] += hqq * ci * cj;
                }
            }
        }
        (grad, hess)
    }

    /// Multipliers at `y`, corrected to first order by one Newton step so they
    /// match the stationarity measure used for termination.
    fn dual_estimates(&self, y: &DVector<f64>, t: f64) -> (DVector<f64>, DVector<f64>) {
        let (gb, hb) = self.barrier_derivatives(y);
        let grad = (&self.p * y + &self.q) * t + &gb;
        let d = newton_direction(&(&self.p * t + &hb), &grad).unwrap_or_else(|| DVector::zeros(y.len()));
        let s = self.slacks(y);
        let gd = &self.g * &d;
        let linear = DVector::from_fn(s.len(), |i, _| ((1.0 + gd[i] / s[i]) / (t * s[i])).max(0.0));
        let hyp = DVector::from_iterator(
            self.hyp.len(),
            self.hyp.iter().map(|h| {
                let (p, q) = (h.p.eval(y), h.q.eval(y));
                let w = p.mul_add(q, -h.k2);
                let dw = q * h.p.eval_linear(&d) + p * h.q.eval_linear(&d);
                ((1.0 - dw / w) / (t * w)).max(0.0)
            }),
        );
        (linear, hyp)
    }

    /// Largest step in `[0, 1]` keeping the linear slacks positive (with margin).
    fn linear_step_limit(&self, y: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let s = self.slacks(y);
        let gd = &self.g * d;
        let mut alpha: f64 = 1.0;
        for i in 0..s.len() {
            if gd[i] > 0.0 {
                alpha = alpha.min(0.99 * s[i] / gd[i]);
            }
        }
        alpha
    }
}

struct PathOutcome {
    y: DVector<f64>,
    t: f64,
    steps: usize,
    status: ConicStatus,
    stationarity: f64,
}

fn newton_direction(h: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    for reg in [0.0, 1e-14, 1e-12, 1e-10, 1e-8] {
        let mut m = h.clone();
        for i in 0..n {
            m[(i, i)] += reg * scale;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&(-grad));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
    }
    None
}

/// Predicate that stops path following as soon as it holds.
type EarlyExit<'a> = dyn Fn(&DVector<f64>) -> bool + 'a;

/// Barrier path following from a strictly feasible `y0`.
const CENTERING_STEPS: usize = 50;

fn path_follow(
    form: &Form,
    y0: DVector<f64>,
    tol: f64,
    budget: usize,
    early_exit: Option<&EarlyExit<'_>>,
    mut trace: Option<&mut Vec<TraceRow>>,
    kkt_scale: f64,
) -> PathOutcome {
    let nu = form.nu();
    let mut y = y0;
    let f0 = form.objective(&y);
    let mut t = if nu > 0.0 { (nu / f0.abs().max(1e-6)).clamp(1e-4, 1e6) } else { 1.0 };
    let mut steps = 0;
    // Duals are read from the linearised barrier gradient after one Newton step.
    let stationarity = |y: &DVector<f64>, t: f64| -> f64 {
        let (gb, hb) = form.barrier_derivatives(y);
        let grad = (&form.p * y + &form.q) * t + &gb;
        let gc = match newton_direction(&(&form.p * t + &hb), &grad) {
            Some(d) => &gb + &hb * d,
            None => gb,
        };
        (&form.p * y + &form.q + gc / t).amax() / kkt_scale
    };
    let kkt_target = tol.max(1e-7);
    loop {
        // Centering at fixed t; tighter once the gap target is met.
        let finishing = nu == 0.0 || nu / t <= tol * (1.0 + 1e-9);
        let mut centered = false;
        let mut best_decrement = f64::INFINITY;
        let mut stalled = 0;
        for inner in 0..CENTERING_STEPS {
            if inner + 1 == CENTERING_STEPS {
                centered = true;
            }
            if steps >= budget {
                break;
            }
            let (gb, hb) = form.barrier_derivatives(&y);
            let grad = (&form.p * &y + &form.q) * t + gb;
            let hess = &form.p * t + hb;
            let Some(d) = newton_direction(&hess, &grad) else {
                centered = true;
                break;
            };
            let decrement = (-grad.dot(&d)).max(0.0);
            let done = if finishing {
                decrement <= 1e-24 || stationarity(&y, t) <= 0.1 * kkt_target
            } else {
                decrement <= 1e-6 || stationarity(&y, t) <= 0.1 * kkt_target
            };
            if decrement < best_decrement {
                best_decrement = decrement;
                stalled = 0;
            } else {
                stalled += 1;
            }
            if done || stalled >= 8 || d.amax() <= 4.0 * f64::EPSILON * y.amax().max(1.0) {
                centered = true;
                break;
            }
            let lambda = decrement.sqrt();
            let merit = |z: &DVector<f64>| form.barrier(z).map(|b| t * form.objective(z) + b);
            let current = merit(&y).unwrap_or(f64::INFINITY);
            let limit = form.linear_step_limit(&y, &d);
            let mut moved = false;
            let mut step = limit;
            for _ in 0..60 {
                let cand = &y + &d * step;
                if let Some(m) = merit(&cand) {
                    if lambda < 0.3 || m <= current - 0.01 * step * decrement {
                        y = cand;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                let damped = (1.0 / (1.0 + lambda)).min(limit);
                let cand = &y + &d * damped;
                if form.barrier(&cand).is_some() {
                    y = cand;
                    moved = true;
                }
            }
            steps += 1;
            if let Some(exit) = early_exit {
                if exit(&y) {
                    return PathOutcome {
                        stationarity: stationarity(&y, t),
                        y,
                        t,
                        steps,
                        status: ConicStatus::Optimal,
                    };
                }
            }
            if !moved {
                centered = true;
                break;
            }
        }
        let stat = stationarity(&y, t);
        let kkt = stat.max(if nu > 0.0 { 1.0 / t } else { 0.0 });
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(TraceRow {
                iter: steps,
                mu: 1.0 / t,
                objective: form.objective(&y),
                kkt_residual: kkt,
            });
        }
        if centered && finishing {
            let status = if stat <= kkt_target {
                ConicStatus::Optimal
            } else {
                ConicStatus::MaxIter
            };
            log::debug!("barrier solve: {status:?} after {steps} steps, stationarity {stat:e}");
            return PathOutcome {
                y,
                t,
                steps,
                status,
                stationarity: stat,
            };
        }
        if steps >= budget {
            return PathOutcome {
                y,
                t,
                steps,
                status: ConicStatus::MaxIter,
                stationarity: stat,
            };
        }
        if centered {
            let next = t * 10.0;
            t = if nu / next <= 2.0 * tol { nu / tol } else { next };
        }
    }
}

fn build_form(p: &ConicProblem) -> Form {
    let n = p.n_vars();
    let mut g_rows: Vec<(Vec<f64>, f64)> = (0..p.ineq.nrows())
        .map(|i| (p.ineq.row(i).iter().copied().collect(), p.ineq_rhs[i]))
        .collect();
    for (j, l) in p.lower.iter().enumerate() {
        if l.is_finite() {
            let mut row = vec![0.0; n];
            row[j] = -1.0;
            g_rows.push((row, -l));
        }
    }
    let g = DMatrix::from_fn(g_rows.len(), n, |i, j| g_rows[i].0[j]);
    let gr = DVector::from_fn(g_rows.len(), |i, _| g_rows[i].1);
    let at = p.a.transpose();
    Form {
        p: &at * &p.a * 2.0,
        q: -(&at * &p.b) * 2.0,
        constant: p.b.norm_squared(),
        hyp: p
            .hyperbolic
            .iter()
            .map(|h| HypTerm {
                p: Affine {
                    coef: vec![(h.u, 1.0)],
                    constant: 0.0,
                },
                q: Affine {
                    coef: vec![(h.v, 1.0)],
                    constant: 0.0,
                },
                k2: h.k * h.k,
            })
            .collect(),
        g,
        gr,
    }
}

/// Phase 1: minimize a common slack `s` over shifted constraints.
/// Returns a strictly feasible point or `None` if none exists.
fn phase_one(form: &Form, x0: &DVector<f64>, tol: f64, budget: usize) -> Option<DVector<f64>> {
    let n = x0.len();
    let mut s0: f64 = 0.0;
    for v in (&form.g * x0 - &form.gr).iter() {
        s0 = s0.max(*v);
    }
    for h in &form.hyp {
        let (p, q) = (h.p.eval(x0), h.q.eval(x0));
        s0 = s0.max(h.k2.sqrt() - p.min(q));
    }
    let s0 = s0 + 1.0;
    let m = form.g.nrows();
    // Rows G x - s <= g, plus -s <= 1.
    let mut g = DMatrix::zeros(m + 1, n + 1);
    g.view_mut((0, 0), (m, n)).copy_from(&form.g);
    for i in 0..m {
        g[(i, n)] = -1.0;
    }
    g[(m, n)] = -1.0;
    let gr = form.gr.clone().push(1.0);
    let shift = |a: &Affine| {
        let mut coef = a.coef.clone();
        coef.push((n, 1.0));
        Affine {
            coef,
            constant: a.constant,
        }
    };
    let hyp = form
        .hyp
        .iter()
        .map(|h| HypTerm {
            p: shift(&h.p),
            q: shift(&h.q),
            k2: h.k2,
        })
        .collect();
    // A small proximal term keeps the Newton system definite.
    let mut pm = DMatrix::zeros(n + 1, n + 1);
    let mut q = DVector::zeros(n + 1);
    for i in 0..n {
        pm[(i, i)] = 1e-8;
        q[i] = -1e-8 * x0[i];
    }
    q[n] = 1.0;
    let aux = Form {
        p: pm,
        q,
        constant: 0.0,
        hyp,
        g,
        gr,
    };
    let y0 = x0.clone().push(s0);
    let feasible = |y: &DVector<f64>| y[n] < 0.0 && form.strictly_feasible(&y.rows(0, n).into_owned());
    if !aux.strictly_feasible(&y0) {
        return None;
    }
    let out = path_follow(&aux, y0, tol, budget, Some(&feasible), None, 1.0);
    let x = out.y.rows(0, n).into_owned();
    form.strictly_feasible(&x).then_some(x)
}

/// A cheap interior guess: positive values for cone variables, everything
/// else pushed above its lower bound.
fn default_start(p: &ConicProblem) -> DVector<f64> {
    let n = p.n_vars();
    let mut x = DVector::zeros(n);
    for h in &p.hyperbolic {
        let v = h.k.max(1.0) * 2.0;
        x[h.u] = v;
        x[h.v] = v;
    }
    for j in 0..n {
        if p.lower[j].is_finite() && x[j] <= p.lower[j] {
            x[j] = p.lower[j] + 1.0;
        }
    }
    x
}

/// Solves the problem. `Infeasible` and `MaxIter` are reported through the
/// returned status.
pub fn solve(problem: &ConicProblem, opts: &ConicOptions) -> Result<ConicSolution> {
    problem.validate()?;
    let form = build_form(problem);
    let n = problem.n_vars();
    let start = opts.x0.clone().unwrap_or_else(|| default_start(problem));
    if start.len() != n {
        return Err(Error::DimensionMismatch("starting point".into()));
    }
    let y0 = if form.strictly_feasible(&start) {
        start
    } else {
        match phase_one(&form, &start, 1e-9, opts.max_iter.max(200)) {
            Some(y) => y,
            None => {
                return Ok(ConicSolution {
                    objective: problem.objective(&start),
                    x: start,
                    kkt_residual: f64::INFINITY,
                    status: ConicStatus::Infeasible,
                    iterations: 0,
                    linear_duals: DVector::zeros(form.g.nrows()),
                    hyperbolic_duals: DVector::zeros(form.hyp.len()),
                    trace: Vec::new(),
                })
            }
        }
    };
    let kkt_scale = 1.0 + (problem.a.transpose() * &problem.b).amax();
    let mut trace = Vec::new();
    let out = path_follow(
        &form,
        y0,
        opts.tol,
        opts.max_iter,
        None,
        opts.trace.then_some(&mut trace),
        kkt_scale,
    );
    let (linear_duals, hyperbolic_duals) = form.dual_estimates(&out.y, out.t);
    let complementarity = if form.nu() > 0.0 { 1.0 / out.t } else { 0.0 };
    Ok(ConicSolution {
        objective: problem.objective(&out.y),
        kkt_residual: out.stationarity.max(complementarity),
        x: out.y,
        status: out.status,
        iterations: out.steps,
        linear_duals,
        hyperbolic_duals,
        trace,
    })
}

/// Euclidean projection of `(u, v)` onto `{u v >= k^2, u >= 0, v >= 0}`.
///
/// In the rotated coordinates `s = (u + v)/2`, `w = (u - v)/2` the set is the
/// epigraph `s >= sqrt(k^2 + w^2)`; the optimal `w` solves a scalar equation
/// that is monotone on the bracket used here.
pub fn project_hyperbolic(u: f64, v: f64, k: f64) -> (f64, f64) {
    let k = k.abs();
    if k == 0.0 {
        return (u.max(0.0), v.max(0.0));
    }
    let s0 = 0.5 * (u + v);
    let w0 = 0.5 * (u - v);
    let hull = |w: f64| (k * k + w * w).sqrt();
    if u >= 0.0 && v >= 0.0 && s0 >= hull(w0) * (1.0 - 4.0 * f64::EPSILON) {
        return (u, v);
    }
    let sign = if w0 < 0.0 { -1.0 } else { 1.0 };
    let a = w0.abs();
    // phi'(w) = (w - a) + (h(w) - s0) h'(w), increasing on [max(w_s, 0), a].
    let dphi = |w: f64| {
        let h = hull(w);
        (w - a) + (h - s0) * w / h
    };
    let ddphi = |w: f64| {
        let h = hull(w);
        1.0 + (w / h).powi(2) + (h - s0) * k * k / h.powi(3)
    };
    let ws = if s0 > k { (s0 * s0 - k * k).sqrt() } else { 0.0 };
    let (mut lo, mut hi) = (ws.min(a), a);
    let mut w = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = dphi(w);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let newton = w - f / ddphi(w);
        w = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * a.max(k) {
            break;
        }
    }
    let w = sign * w;
    let s = hull(w);
    (s + w, s - w)
}
