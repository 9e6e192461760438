//! Centralized stability monitoring: a conic certificate for region-of-attraction
//! membership of a tap position, and minimal load-susceptance reduction when
//! the certificate fails.
//!
//! Variables are stacked as `x = [V; u]` where `u = V / r^2`.

mod direction;

pub use direction::{roa_direction_opt, staircase_corners, union_roa, write_corners_csv, DirectionOptions, RoaWitness};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{self, ConicOptions, ConicProblem, ConicSolution, ConicStatus};
use crate::dynamics::TapState;
use crate::equilibria::{self, AlphaOptions, Equilibrium, RegionCheck, RegionPWitness, P_TOL};
use crate::error::{Error, Result};
use crate::network::Network;

/// Costs at or below this count as zero.
pub const ZERO_TOL: f64 = 1e-10;
/// Solver tolerance used for certification.
pub const CERTIFY_TOL: f64 = 1e-12;
const CERTIFY_MAX_ITER: usize = 400;
const CLIP_TOL: f64 = 1e-10;
const BOUND_TOL: f64 = 1e-8;
const SUPPORT_MARGINS: [f64; 5] = [0.0, 1e-6, 1e-5, 1e-4, 1e-3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurrogateOptions {
    /// Include `B~ V <= h`, which keeps the recovered reduction below `b_s`.
    pub support_bound: bool,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        SurrogateOptions { support_bound: true }
    }
}

/// `min ||B~ V + [b_s] u - h||^2` s.t. `u_i V_i >= V_0i^2`, `u >= V / r0^2`, `V >= 0`
/// and optionally `B~ V <= h`.
pub fn build_surrogate(net: &Network, r0: &TapState, opts: SurrogateOptions) -> Result<ConicProblem> {
    let n = net.n_load();
    check_taps(net, r0)?;
    let mut a = DMatrix::zeros(n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(net.b_tilde());
    for i in 0..n {
        a[(i, n + i)] = net.load_susceptances()[i];
    }
    let mut p = ConicProblem::least_squares(a, net.h().clone());
    for i in 0..n {
        p.add_hyperbolic(n + i, i, net.setpoints()[i]);
    }
    for i in 0..n {
        p.add_ineq(&[(i, 1.0 / (r0[i] * r0[i])), (n + i, -1.0)], 0.0);
    }
    for i in 0..n {
        p.add_ineq(&[(i, -1.0)], 0.0);
    }
    if opts.support_bound {
        for i in 0..n {
            let row: Vec<(usize, f64)> = (0..n)
                .filter(|&k| net.b_tilde()[(i, k)] != 0.0)
                .map(|k| (k, net.b_tilde()[(i, k)]))
                .collect();
            p.add_ineq(&row, net.h()[i]);
        }
    }
    Ok(p)
}

/// Strictly feasible point of the surrogate built from the network data.
pub fn surrogate_start(net: &Network, r0: &TapState) -> DVector<f64> {
    let n = net.n_load();
    let z1 = net.z_open() * DVector::from_element(n, 1.0);
    let delta = 0.25 * net.e_open().min() / z1.max();
    let v = net.z_open() * (net.h() * 0.5 - DVector::from_element(n, delta));
    let mut x = DVector::zeros(2 * n);
    for i in 0..n {
        let v0 = net.setpoints()[i];
        x[i] = v[i];
        x[n + i] = 2.0 * (v[i] / (r0[i] * r0[i])).max(v0 * v0 / v[i]);
    }
    x
}

fn check_taps(net: &Network, r0: &TapState) -> Result<()> {
    if r0.len() != net.n_load() {
        return Err(Error::DimensionMismatch(format!(
            "tap vector has {} entries, network has {} loads",
            r0.len(),
            net.n_load()
        )));
    }
    for (index, &value) in r0.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveTap { index, value });
        }
    }
    Ok(())
}

/// Solves the surrogate from the analytic interior start.
pub fn solve_surrogate(net: &Network, r0: &TapState, sopts: SurrogateOptions, tol: f64) -> Result<ConicSolution> {
    let problem = build_surrogate(net, r0, sopts)?;
    let opts = ConicOptions {
        tol,
        max_iter: CERTIFY_MAX_ITER,
        x0: Some(surrogate_start(net, r0)),
        trace: false,
    };
    let sol = conic::solve(&problem, &opts)?;
    match sol.status {
        ConicStatus::Optimal => Ok(sol),
        ConicStatus::Infeasible => Err(Error::Solver("surrogate reported infeasible".into())),
        ConicStatus::MaxIter => Err(Error::Solver(format!(
            "surrogate hit the iteration limit (kkt residual {:e})",
            sol.kkt_residual
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Certificate {
    Stable {
        /// A point of `P` below `r0`.
        witness: RegionPWitness,
        cost: f64,
        v: Vec<f64>,
        u: Vec<f64>,
    },
    NeedsSupport {
        cost: f64,
        v: Vec<f64>,
        u: Vec<f64>,
    },
}

impl Certificate {
    pub fn cost(&self) -> f64 {
        match self {
            Certificate::Stable { cost, .. } | Certificate::NeedsSupport { cost, .. } => *cost,
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self, Certificate::Stable { .. })
    }
}

/// Certifies `r0` with the default surrogate.
pub fn certify_stability(net: &Network, r0: &TapState) -> Result<Certificate> {
    certify_with(net, r0, SurrogateOptions::default(), ZERO_TOL)
}

/// Stable requires a zero optimal cost and a witness that checks out in `P`
/// below `r0`: `r0` itself when it lies in `P`, otherwise `sqrt(V / u)`.
pub fn certify_with(net: &Network, r0: &TapState, sopts: SurrogateOptions, zero_tol: f64) -> Result<Certificate> {
    let sol = solve_surrogate(net, r0, sopts, CERTIFY_TOL)?;
    let n = net.n_load();
    let v: Vec<f64> = sol.x.rows(0, n).iter().copied().collect();
    let u: Vec<f64> = sol.x.rows(n, n).iter().copied().collect();
    let cost = sol.objective;
    if cost <= zero_tol {
        if let Some(witness) = verified_witness(net, r0, &v, &u)? {
            return Ok(Certificate::Stable { witness, cost, v, u });
        }
    }
    Ok(Certificate::NeedsSupport { cost, v, u })
}

fn verified_witness(net: &Network, r0: &TapState, v: &[f64], u: &[f64]) -> Result<Option<RegionPWitness>> {
    if let RegionCheck::InP(w) = equilibria::in_region_p(net, r0)? {
        return Ok(Some(w));
    }
    let cand = TapState::new(
        v.iter()
            .zip(u)
            .zip(r0.iter())
            .map(|((v, u), r)| (v / u).sqrt().min(*r))
            .collect(),
    );
    if cand.iter().any(|x| !(*x > 0.0)) {
        return Ok(None);
    }
    Ok(match equilibria::in_region_p_tol(net, &cand, P_TOL)? {
        RegionCheck::InP(w) => Some(w),
        RegionCheck::NotInP { .. } => None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPlan {
    /// Reduction of `b_s` per load.
    pub d: Vec<f64>,
    /// Equilibrium of the reduced network.
    pub post_support_alpha: TapState,
    /// Whether `r0` certifies on the reduced network.
    pub roa_certified: bool,
    /// Extra reduction added to each supported load, as a fraction of its `b_s`.
    pub margin: f64,
    /// `sum d`.
    pub total_support: f64,
    /// `100 sum d / sum b_s`.
    pub percentage: f64,
    /// `sum V_0^2 d`.
    pub reactive_support: f64,
    /// `100 sum V_0^2 d / sum V_0^2 b_s`.
    pub reactive_percentage: f64,
    /// Optimal surrogate residual norm.
    pub residual_norm: f64,
}

/// Minimal susceptance reduction that recaptures `r0`.
pub fn compute_support(net: &Network, r0: &TapState) -> Result<SupportPlan> {
    let (v, u, cost) = match certify_stability(net, r0)? {
        Certificate::Stable { .. } => return Err(Error::AlreadyStable),
        Certificate::NeedsSupport { cost, v, u } => (v, u, cost),
    };
    let n = net.n_load();
    let vv = DVector::from_column_slice(&v);
    let uu = DVector::from_column_slice(&u);
    let excess = net.b_tilde() * &vv + net.load_susceptances().component_mul(&uu) - net.h();
    let b_s = net.load_susceptances();
    let mut d = vec![0.0; n];
    for i in 0..n {
        let mut di = excess[i] / uu[i];
        if di < -BOUND_TOL || di > b_s[i] + BOUND_TOL || !di.is_finite() {
            return Err(Error::SupportInfeasible {
                index: i,
                value: di,
                bound: b_s[i],
            });
        }
        if di < CLIP_TOL {
            di = 0.0;
        }
        d[i] = di.min(b_s[i]);
    }
    // The exact reduction leaves the witness on the boundary of P; widen it
    // by the smallest margin that certifies.
    let exact = d.clone();
    let mut roa_certified = false;
    let mut margin = 0.0;
    for m in SUPPORT_MARGINS {
        for i in 0..n {
            d[i] = if exact[i] > 0.0 { (exact[i] + m * b_s[i]).min(b_s[i]) } else { 0.0 };
        }
        let reduced = net.with_load_susceptances(b_s - DVector::from_column_slice(&d))?;
        if certify_stability(&reduced, r0)?.is_stable() {
            roa_certified = true;
            margin = m;
            break;
        }
    }
    if !roa_certified {
        log::warn!("support plan does not re-certify r0 on the reduced network at any margin");
        d = exact;
    } else if margin > 0.0 {
        log::debug!("support plan widened by {margin:e} of b_s to re-certify r0");
    }
    let reduced = net.with_load_susceptances(b_s - DVector::from_column_slice(&d))?;
    let alpha: Equilibrium = equilibria::find_alpha(&reduced, &AlphaOptions::default())?;
    let total: f64 = d.iter().sum();
    let v0sq = net.setpoints().map(|x| x * x);
    let reactive: f64 = d.iter().zip(v0sq.iter()).map(|(d, w)| d * w).sum();
    let reactive_base: f64 = b_s.component_mul(&v0sq).sum();
    Ok(SupportPlan {
        d,
        post_support_alpha: alpha.r_star,
        roa_certified,
        margin,
        total_support: total,
        percentage: 100.0 * total / b_s.sum(),
        reactive_support: reactive,
        reactive_percentage: 100.0 * reactive / reactive_base,
        residual_norm: cost.max(0.0).sqrt(),
    })
}

/// Network with `b_s` reduced by `d`.
pub fn reduced_network(net: &Network, plan: &SupportPlan) -> Result<Network> {
    net.with_load_susceptances(net.load_susceptances() - DVector::from_column_slice(&plan.d))
}
