//! Consensus ADMM for the support surrogate over agents that each own a
//! connected part of the network.
//!
//! A round is three supersteps on the message bus:
//! local solves then `W` broadcast, consensus updates at bus owners then `z`
//! broadcast, and multiplier updates. Owners keep mirrors of the neighbors'
//! `mu` multipliers, updated with the same rule, so only `W` and `z` values
//! travel.

mod partition;
mod transport;

pub use partition::{build_partition, AgentBuses, Partition};
pub use transport::{InProcessBus, Message, Transport, ValueKind};

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::output::fmt_num;
use crate::conic::{self, ConicOptions, ConicProblem, ConicStatus};
use crate::dynamics::TapState;
use crate::error::{Error, Result};
use crate::monitor;
use crate::network::Network;

pub const DEFAULT_RHO: f64 = 200.0;
const WARM_BLEND: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOptions {
    pub rho: f64,
    /// Bound on primal and dual residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative objective change regarded as settled.
    pub obj_tol: f64,
    /// Initial `z` values (and reported iterates) instead of the flat start.
    pub warm_start: Option<WarmStart>,
    /// Include the `B~ V <= h` rows, as in the centralized surrogate.
    pub support_bound: bool,
    pub parallel: bool,
    /// Tolerance of each local conic solve.
    pub local_tol: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            rho: DEFAULT_RHO,
            tol: 1e-6,
            max_iter: 5000,
            obj_tol: 1e-4,
            warm_start: None,
            support_bound: true,
            parallel: true,
            local_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmmVerdict {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmReport {
    pub iterations: usize,
    pub objective_history: Vec<f64>,
    pub primal_residual_history: Vec<f64>,
    pub dual_residual_history: Vec<f64>,
    /// Owner values of `V` and `u` per load bus.
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    /// Consensus values of boundary buses.
    pub z: BTreeMap<usize, f64>,
    pub verdict: AdmmVerdict,
    pub messages: usize,
}

impl AdmmReport {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(f64::NAN)
    }

    /// Writes `iter,objective,primal_res,dual_res`.
    pub fn write_history_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "objective", "primal_res", "dual_res"])?;
        for k in 0..self.iterations {
            out.write_record([
                (k + 1).to_string(),
                fmt_num(self.objective_history[k]),
                fmt_num(self.primal_residual_history[k]),
                fmt_num(self.dual_residual_history[k]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Private state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub own: Vec<usize>,
    pub adjacent: Vec<usize>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    /// Copies of adjacent foreign voltages, aligned with `adjacent`.
    pub w: Vec<f64>,
    /// Multipliers of owned boundary buses.
    pub lambda: BTreeMap<usize, f64>,
    /// Multipliers of the foreign copies, aligned with `adjacent`.
    pub mu: Vec<f64>,
    /// Latest consensus values for owned boundary and adjacent buses.
    pub z: BTreeMap<usize, f64>,
    /// Mirrors of neighbors' multipliers on owned boundary buses, keyed `(bus, agent)`.
    pub mu_mirror: BTreeMap<(usize, usize), f64>,
}

/// Per-agent problem data that does not change between rounds.
#[derive(Debug, Clone)]
pub struct LocalModel {
    net: Network,
    r0: TapState,
    support_bound: bool,
}

impl LocalModel {
    pub fn new(net: &Network, r0: &TapState, support_bound: bool) -> Self {
        LocalModel {
            net: net.clone(),
            r0: r0.clone(),
            support_bound,
        }
    }

    /// Local residual `sum_j (B~ [V; W] + b_s u - h)_j^2` over owned buses.
    pub fn local_objective(&self, agent: &AgentState) -> f64 {
        let mut total = 0.0;
        for (jj, &j) in agent.own.iter().enumerate() {
            let mut s = self.net.load_susceptances()[j] * agent.u[jj] - self.net.h()[j];
            for (kk, &k) in agent.own.iter().enumerate() {
                s += self.net.b_tilde()[(j, k)] * agent.v[kk];
            }
            for (kk, &k) in agent.adjacent.iter().enumerate() {
                s += self.net.b_tilde()[(j, k)] * agent.w[kk];
            }
            total += s * s;
        }
        total
    }
}

/// Local solve over `x = [V_own; u_own; W]`.
pub fn x_update(model: &LocalModel, agent: &AgentState, rho: f64, tol: f64) -> Result<AgentState> {
    let net = &model.net;
    let no = agent.own.len();
    let na = agent.adjacent.len();
    let nx = 2 * no + na;
    let col_of = |bus: usize| -> Option<usize> {
        agent
            .own
            .iter()
            .position(|&b| b == bus)
            .or_else(|| agent.adjacent.iter().position(|&b| b == bus).map(|p| 2 * no + p))
    };
    let own_boundary: Vec<usize> = agent.lambda.keys().copied().collect();
    let rows = no + own_boundary.len() + na;
    let mut a = DMatrix::zeros(rows, nx);
    let mut b = DVector::zeros(rows);
    for (jj, &j) in agent.own.iter().enumerate() {
        for k in 0..net.n_load() {
            let bjk = net.b_tilde()[(j, k)];
            if bjk != 0.0 {
                let col = col_of(k).ok_or_else(|| {
                    Error::InvalidPartition(format!("bus {k} coupled to agent {} but not adjacent", agent.id))
                })?;
                a[(jj, col)] += bjk;
            }
        }
        a[(jj, no + jj)] = net.load_susceptances()[j];
        b[jj] = net.h()[j];
    }
    let sr = (0.5 * rho).sqrt();
    for (t, &j) in own_boundary.iter().enumerate() {
        let row = no + t;
        let col = agent.own.iter().position(|&x| x == j).expect("owned boundary bus");
        let z = *agent.z.get(&j).ok_or(Error::MissingContribution { bus: j })?;
        a[(row, col)] = sr;
        b[row] = sr * (z - agent.lambda[&j] / rho);
    }
    for (kk, &k) in agent.adjacent.iter().enumerate() {
        let row = no + own_boundary.len() + kk;
        let z = *agent.z.get(&k).ok_or(Error::MissingContribution { bus: k })?;
        a[(row, 2 * no + kk)] = sr;
        b[row] = sr * (z - agent.mu[kk] / rho);
    }
    let mut p = ConicProblem::least_squares(a, b);
    for (jj, &j) in agent.own.iter().enumerate() {
        p.add_hyperbolic(no + jj, jj, net.setpoints()[j]);
        let r = model.r0[j];
        p.add_ineq(&[(jj, 1.0 / (r * r)), (no + jj, -1.0)], 0.0);
        p.add_ineq(&[(jj, -1.0)], 0.0);
    }
    if model.support_bound {
        for &j in &agent.own {
            let row: Vec<(usize, f64)> = (0..net.n_load())
                .filter(|&k| net.b_tilde()[(j, k)] != 0.0)
                .map(|k| (col_of(k).expect("checked above"), net.b_tilde()[(j, k)]))
                .collect();
            p.add_ineq(&row, net.h()[j]);
        }
    }
    let x0 = local_start(model, agent, &p);
    let sol = conic::solve(
        &p,
        &ConicOptions {
            tol,
            max_iter: 400,
            x0: Some(x0),
            trace: false,
        },
    )
    .map_err(|e| wrap(agent.id, e))?;
    match sol.status {
        ConicStatus::Optimal => {}
        ConicStatus::Infeasible => return Err(wrap(agent.id, Error::Infeasible)),
        ConicStatus::MaxIter => {
            return Err(wrap(
                agent.id,
                Error::LocalSolveFailed(format!("local solve hit the iteration limit (kkt {:e})", sol.kkt_residual)),
            ))
        }
    }
    let mut out = agent.clone();
    out.v = sol.x.rows(0, no).iter().copied().collect();
    out.u = sol.x.rows(no, no).iter().copied().collect();
    out.w = sol.x.rows(2 * no, na).iter().copied().collect();
    Ok(out)
}

fn wrap(agent: usize, e: Error) -> Error {
    Error::Agent {
        agent,
        source: Box::new(e),
    }
}

/// Previous iterate pulled slightly toward the global analytic start
/// restricted to the agent, or that start alone.
fn local_start(model: &LocalModel, agent: &AgentState, p: &ConicProblem) -> DVector<f64> {
    let global = monitor::surrogate_start(&model.net, &model.r0);
    let n = model.net.n_load();
    let mut x: Vec<f64> = agent.own.iter().map(|&j| global[j]).collect();
    x.extend(agent.own.iter().map(|&j| global[n + j]));
    x.extend(agent.adjacent.iter().map(|&k| global[k]));
    let start = DVector::from_vec(x);
    let mut prev: Vec<f64> = agent.v.clone();
    prev.extend(&agent.u);
    prev.extend(&agent.w);
    let prev = DVector::from_vec(prev);
    if interior(p, &prev) {
        let blended = &prev * (1.0 - WARM_BLEND) + &start * WARM_BLEND;
        if interior(p, &blended) {
            return blended;
        }
        return prev;
    }
    start
}

fn interior(p: &ConicProblem, x: &DVector<f64>) -> bool {
    let lin_ok = p.ineq.nrows() == 0 || (&p.ineq * x - &p.ineq_rhs).max() < 0.0;
    lin_ok
        && p.hyperbolic.iter().all(|h| {
            let (a, b) = (x[h.u], x[h.v]);
            a > 0.0 && b > 0.0 && a * b > h.k * h.k
        })
}

/// `z = (lambda + rho V + sum_j (mu_j + rho W_j)) / (rho (1 + n))`.
pub fn z_update(bus: usize, lambda: f64, v: f64, contributions: &[(f64, f64)], rho: f64) -> Result<f64> {
    if contributions.is_empty() {
        return Err(Error::MissingContribution { bus });
    }
    let sum: f64 = contributions.iter().map(|(mu, w)| mu + rho * w).sum();
    Ok((lambda + rho * v + sum) / (rho * (1.0 + contributions.len() as f64)))
}

/// `m + rho (x - z)`.
pub fn dual_update(multiplier: f64, value: f64, z: f64, rho: f64) -> f64 {
    multiplier + rho * (value - z)
}

/// Sets up agents with the flat start (or a warm start) and zero multipliers.
pub fn init_agents(net: &Network, part: &Partition, warm: Option<&WarmStart>) -> Result<Vec<AgentState>> {
    let n = net.n_load();
    let (v0, u0) = match warm {
        Some(ws) => {
            if ws.v.len() != n || ws.u.len() != n {
                return Err(Error::DimensionMismatch("warm start".into()));
            }
            (ws.v.clone(), ws.u.clone())
        }
        None => {
            let vmax = net.setpoints().max();
            (vec![1.0; n], vec![vmax * vmax; n])
        }
    };
    Ok(part
        .agents
        .iter()
        .enumerate()
        .map(|(id, a)| {
            let lambda: BTreeMap<usize, f64> =
                a.own.iter().filter(|j| part.is_boundary(**j)).map(|&j| (j, 0.0)).collect();
            let mut z = BTreeMap::new();
            for &j in lambda.keys().chain(a.adjacent.iter()) {
                z.insert(j, v0[j]);
            }
            let mu_mirror = lambda
                .keys()
                .flat_map(|&j| part.neighbors_of(j).into_iter().map(move |g| ((j, g), 0.0)))
                .collect();
            AgentState {
                id,
                own: a.own.clone(),
                adjacent: a.adjacent.clone(),
                v: a.own.iter().map(|&j| v0[j]).collect(),
                u: a.own.iter().map(|&j| u0[j]).collect(),
                w: a.adjacent.iter().map(|&k| v0[k]).collect(),
                lambda,
                mu: vec![0.0; a.adjacent.len()],
                z,
                mu_mirror,
            }
        })
        .collect())
}

/// Runs ADMM over the in-process bus.
pub fn run(net: &Network, r0: &TapState, part: &Partition, opts: &AdmmOptions) -> Result<AdmmReport> {
    let mut bus = InProcessBus::new();
    run_with_transport(net, r0, part, opts, &mut bus)
}

pub fn run_with_transport<T: Transport>(
    net: &Network,
    r0: &TapState,
    part: &Partition,
    opts: &AdmmOptions,
    bus: &mut T,
) -> Result<AdmmReport> {
    if !(opts.rho > 0.0) {
        return Err(Error::InvalidPartition(format!("rho must be positive (got {})", opts.rho)));
    }
    if part.owner.len() != net.n_load() {
        return Err(Error::InvalidPartition("partition does not match network".into()));
    }
    monitor::build_surrogate(net, r0, Default::default())?;
    let model = LocalModel::new(net, r0, opts.support_bound);
    let rho = opts.rho;
    let mut agents = init_agents(net, part, opts.warm_start.as_ref())?;
    let mut objective_history = Vec::new();
    let mut primal_history = Vec::new();
    let mut dual_history = Vec::new();
    let mut verdict = AdmmVerdict::MaxIter;

    for round in 0..opts.max_iter {
        // Step 1: local solves, then W to bus owners.
        agents = if opts.parallel {
            agents
                .par_iter()
                .map(|a| x_update(&model, a, rho, opts.local_tol))
                .collect::<Result<Vec<_>>>()?
        } else {
            agents
                .iter()
                .map(|a| x_update(&model, a, rho, opts.local_tol))
                .collect::<Result<Vec<_>>>()?
        };
        for a in &agents {
            for (kk, &k) in a.adjacent.iter().enumerate() {
                bus.send(Message {
                    from: a.id,
                    to: part.owner[k],
                    round,
                    bus: k,
                    kind: ValueKind::W,
                    value: a.w[kk],
                });
            }
        }
        bus.barrier();

        // Step 2: consensus at owners, then z to every holder of a copy.
        let mut dz: f64 = 0.0;
        let mut received_w: Vec<Vec<Message>> = Vec::with_capacity(agents.len());
        for a in agents.iter_mut() {
            let inbox = bus.receive(a.id);
            let boundary: Vec<usize> = a.lambda.keys().copied().collect();
            for j in boundary {
                let expected = part.neighbors_of(j);
                let contributions: Vec<(usize, f64)> = inbox
                    .iter()
                    .filter(|m| m.bus == j && m.kind == ValueKind::W && m.round == round)
                    .map(|m| (m.from, m.value))
                    .collect();
                if contributions.len() != expected.len()
                    || contributions.iter().zip(&expected).any(|((f, _), g)| f != g)
                {
                    return Err(Error::MissingContribution { bus: j });
                }
                let terms: Vec<(f64, f64)> = contributions
                    .iter()
                    .map(|(g, w)| (a.mu_mirror[&(j, *g)], *w))
                    .collect();
                let jj = a.own.iter().position(|&x| x == j).expect("owned");
                let z = z_update(j, a.lambda[&j], a.v[jj], &terms, rho)?;
                dz = dz.max((z - a.z[&j]).abs());
                a.z.insert(j, z);
                for g in expected {
                    bus.send(Message {
                        from: a.id,
                        to: g,
                        round,
                        bus: j,
                        kind: ValueKind::Z,
                        value: z,
                    });
                }
            }
            received_w.push(inbox);
        }
        bus.barrier();

        // Step 3: multiplier updates (owners also advance their mirrors).
        let mut primal: f64 = 0.0;
        for (a, inbox) in agents.iter_mut().zip(&received_w) {
            let zs = bus.receive(a.id);
            for m in zs.iter().filter(|m| m.kind == ValueKind::Z) {
                let kk = a.adjacent.iter().position(|&x| x == m.bus).ok_or(Error::MissingContribution { bus: m.bus })?;
                dz = dz.max((m.value - a.z[&m.bus]).abs());
                a.z.insert(m.bus, m.value);
                a.mu[kk] = dual_update(a.mu[kk], a.w[kk], m.value, rho);
                primal = primal.max((a.w[kk] - m.value).abs());
            }
            let boundary: Vec<usize> = a.lambda.keys().copied().collect();
            for j in boundary {
                let jj = a.own.iter().position(|&x| x == j).expect("owned");
                let z = a.z[&j];
                primal = primal.max((a.v[jj] - z).abs());
                let l = a.lambda.get_mut(&j).expect("boundary");
                *l = dual_update(*l, a.v[jj], z, rho);
                for m in inbox.iter().filter(|m| m.bus == j && m.kind == ValueKind::W) {
                    let mm = a.mu_mirror.get_mut(&(j, m.from)).expect("mirror");
                    *mm = dual_update(*mm, m.value, z, rho);
                }
            }
        }

        let objective: f64 = agents.iter().map(|a| model.local_objective(a)).sum();
        let settled = objective_history
            .last()
            .is_some_and(|prev: &f64| (objective - prev).abs() <= opts.obj_tol * objective.abs().max(1.0));
        objective_history.push(objective);
        primal_history.push(primal);
        dual_history.push(dz);
        if objective_history.len().is_multiple_of(500) {
            log::debug!(
                "admm iteration {}: objective {objective:e}, primal {primal:e}, dual {dz:e}",
                objective_history.len()
            );
        }
        if primal <= opts.tol && dz <= opts.tol && settled {
            verdict = AdmmVerdict::Converged;
            break;
        }
    }

    log::info!("admm finished after {} iterations: {verdict:?}", objective_history.len());
    let n = net.n_load();
    let mut v = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut z = BTreeMap::new();
    for a in &agents {
        for (jj, &j) in a.own.iter().enumerate() {
            v[j] = a.v[jj];
            u[j] = a.u[jj];
            if let Some(zj) = a.z.get(&j) {
                z.insert(j, *zj);
            }
        }
    }
    Ok(AdmmReport {
        iterations: objective_history.len(),
        objective_history,
        primal_residual_history: primal_history,
        dual_residual_history: dual_history,
        v,
        u,
        z,
        verdict,
        messages: bus.delivered(),
    })
}
