//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary so the verdict lines are printed on every run.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;

use voltstab::admm::{self, AdmmOptions, AdmmVerdict, Partition};
use voltstab::cli::file;
use voltstab::conic::{self, ConicOptions, ConicProblem, ConicSolution};
use voltstab::dynamics::{
    integrate_with, simulate_discrete, ContinuousConfig, DiscreteLtcConfig, TapState, Verdict,
};
use voltstab::equilibria::{
    brute_force_equilibria, default_box, find_alpha, in_region_p, jacobian, AlphaOptions, FixedPointIter, Stability,
};
use voltstab::monitor::{self, Certificate, SurrogateOptions};
use voltstab::network::Network;
use voltstab::twobus::{
    critical_susceptance, simulate_twobus, tap_equilibria, LoadFamily, TwoBusChange, TwoBusEvent, TwoBusParams,
};
use voltstab::{fixtures, Error};

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fail<E: std::fmt::Display>(ctx: &str) -> impl Fn(E) -> String + '_ {
    move |e| format!("{ctx}: {e}")
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load(name: &str) -> Network {
    file::load_network(&fixture_dir().join(name)).expect("fixture loads").net
}

fn partition(net: &Network, name: &str) -> Partition {
    let text = std::fs::read_to_string(fixture_dir().join(name)).expect("partition file");
    let map: BTreeMap<u32, usize> = serde_json::from_str(&text).expect("partition json");
    let assignment = file::assignment_from_map(net, &map).expect("partition ids");
    admm::build_partition(net, &assignment).expect("valid partition")
}

fn within_time(start: Instant, limit: Duration) -> Outcome {
    let took = start.elapsed();
    if took < limit {
        Ok(format!("{:.2} s", took.as_secs_f64()))
    } else {
        Err(format!("took {:.2} s, limit {:.0} s", took.as_secs_f64(), limit.as_secs_f64()))
    }
}

fn example_one() -> TwoBusParams {
    TwoBusParams {
        e: 1.0,
        r: 0.0,
        x: 1.0,
        g_l: 0.8,
        b_l: 0.4,
        v0: 1.0,
        t: 1.0,
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let eq = tap_equilibria(&example_one());
    let (r_minus, r_plus) = (eq.r_minus().ok_or("infeasible")?, eq.r_plus().ok_or("infeasible")?);
    let want_minus = 2.0 * 5f64.sqrt() / 5.0;
    ensure!((r_plus - 1.0).abs() <= 1e-9, "r_plus = {r_plus}");
    ensure!((r_minus - want_minus).abs() <= 1e-9, "r_minus = {r_minus}, want {want_minus}");
    let crit = critical_susceptance(&LoadFamily::power_factor(&example_one(), 2.0)).map_err(fail("critical"))?;
    let want_crit = (1.0 + 5f64.sqrt()) / 8.0;
    ensure!((crit.b_l - want_crit).abs() <= 1e-8, "critical B_L = {}, want {want_crit}", crit.b_l);
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("r_plus {r_plus:.12}, r_minus {r_minus:.12}, B_L* {:.12}, {t}", crit.b_l))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let p = example_one();
    let up = simulate_twobus(&p, 0.9, 50.0 * p.t, &[], None).map_err(fail("r0 = 0.9"))?;
    let r_end = up.samples.last().ok_or("empty trajectory")?.r;
    ensure!((r_end - 1.0).abs() <= 1e-3, "r(50T) = {r_end} from r0 = 0.9");
    let down = simulate_twobus(&p, 0.89, 100.0 * p.t, &[], None).map_err(fail("r0 = 0.89"))?;
    let Verdict::Collapsed { t_collapse } = down.verdict else {
        return Err(format!("r0 = 0.89 ended {:?}", down.verdict));
    };
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("r(50) = {r_end:.6}, collapse at t = {t_collapse:.2}, {t}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let p = example_one();
    let trip = TwoBusEvent {
        time: 10.0,
        change: TwoBusChange::ScaleReactance(1.2),
    };
    let shed = TwoBusEvent {
        time: 11.0,
        change: TwoBusChange::ScaleLoad(0.7),
    };
    let steady = simulate_twobus(&p, 1.0, 10.0, &[], None).map_err(fail("steady"))?;
    let drift = steady.samples.iter().map(|s| (s.r - 1.0).abs()).fold(0.0, f64::max);
    ensure!(drift <= 1e-9, "r = 1 is not steady (drift {drift})");
    let lost = simulate_twobus(&p, 1.0, 100.0, &[trip], None).map_err(fail("trip"))?;
    let Verdict::Collapsed { t_collapse } = lost.verdict else {
        return Err(format!("line trip alone ended {:?}", lost.verdict));
    };
    let saved = simulate_twobus(&p, 1.0, 100.0, &[trip, shed], None).map_err(fail("trip + shed"))?;
    let Verdict::Converged { limit } = &saved.verdict else {
        return Err(format!("trip + shed ended {:?}", saved.verdict));
    };
    let want = tap_equilibria(&saved.final_params).r_plus().ok_or("post-event infeasible")?;
    ensure!((limit[0] - want).abs() <= 1e-3, "limit {} vs r_plus {want}", limit[0]);
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("collapse at t = {t_collapse:.2}, restored to r = {:.6}, {t}", limit[0]))
}

fn desk_fixtures() -> Vec<(&'static str, Network)> {
    vec![
        ("one_load", fixtures::one_load()),
        ("two_load_chain", fixtures::two_load_chain()),
        ("two_load_symmetric", fixtures::two_load_symmetric()),
        ("three_load", fixtures::three_load()),
    ]
}

/// Uniform samples of `P` below `alpha`, away from `alpha`.
fn sample_region_p(net: &Network, alpha: &TapState, count: usize, seed: u64) -> Vec<TapState> {
    let mut rng = common::rng(seed);
    let mut out = Vec::new();
    for _ in 0..1_000_000 {
        if out.len() == count {
            break;
        }
        let r = TapState::new(alpha.iter().map(|a| a * rng.random_range(0.02..1.0)).collect());
        if r.distance(alpha) > 1e-6 && in_region_p(net, &r).is_ok_and(|c| c.is_in()) {
            out.push(r);
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut summary = Vec::new();
    for (k, (name, net)) in desk_fixtures().into_iter().enumerate() {
        let density = [4000, 600, 120][net.n_load() - 1];
        let eqs = brute_force_equilibria(&net, &default_box(&net, 0.005), density, 1e-12).map_err(fail(name))?;
        let alpha = find_alpha(&net, &AlphaOptions::default()).map_err(fail(name))?.r_star;
        ensure!(!eqs.is_empty(), "{name}: no equilibria found");
        for (i, a) in eqs.iter().enumerate() {
            ensure!(a.residual <= 1e-9, "{name}: residual {} at {:?}", a.residual, a.r_star);
            ensure!(
                a.eigenvalues.iter().all(|z| z.norm() > 1e-8),
                "{name}: singular Jacobian at {:?}",
                a.r_star
            );
            for b in &eqs[i + 1..] {
                ensure!(a.r_star.distance(&b.r_star) > 1e-6, "{name}: duplicate roots");
            }
            ensure!(a.r_star.le(&alpha, 1e-9), "{name}: {:?} not dominated by alpha", a.r_star);
            let is_alpha = a.r_star.distance(&alpha) <= 1e-8;
            if is_alpha {
                ensure!(a.stability == Stability::Stable, "{name}: alpha is {:?}", a.stability);
            } else {
                ensure!(
                    a.eigenvalues.iter().any(|z| z.re > 0.0),
                    "{name}: equilibrium {:?} has no eigenvalue in the right half plane",
                    a.r_star
                );
            }
        }
        ensure!(
            eqs.iter().any(|e| e.r_star.distance(&alpha) <= 1e-8),
            "{name}: alpha {alpha:?} missing from the brute-force set"
        );
        let samples = sample_region_p(&net, &alpha, 50, 40 + k as u64);
        ensure!(samples.len() == 50, "{name}: only {} samples of P", samples.len());
        for r in &samples {
            let above = eqs.iter().filter(|e| r.le(&e.r_star, 0.0)).count();
            ensure!(above == 1, "{name}: {above} equilibria above {r:?}");
        }
        summary.push(format!("{name} {}", eqs.len()));
    }
    let t = within_time(start, Duration::from_secs(30))?;
    Ok(format!("equilibria per fixture [{}], {t}", summary.join(", ")))
}

fn criterion_5() -> Outcome {
    let expected = [(3.0 / 16.0, Some(0.75)), (0.25, Some(0.5)), (0.3, None)];
    let mut found = Vec::new();
    for (b_s, want) in expected {
        let net = fixtures::one_load_with(b_s);
        let iterates: Vec<TapState> = FixedPointIter::new(&net).take(2000).collect();
        for w in iterates.windows(2) {
            ensure!(w[1].le(&w[0], 0.0), "b_s = {b_s}: iterate increased {:?} -> {:?}", w[0], w[1]);
        }
        let closed = tap_equilibria(&TwoBusParams {
            e: 1.0,
            r: 0.0,
            x: 1.0,
            g_l: 0.0,
            b_l: -b_s,
            v0: 1.0,
            t: 1.0,
        })
        .r_plus();
        match (find_alpha(&net, &AlphaOptions::default()), want) {
            (Ok(eq), Some(w)) => {
                let a = eq.r_star[0];
                ensure!((a - w).abs() <= 1e-8, "b_s = {b_s}: alpha {a}, want {w}");
                let c = closed.ok_or(format!("b_s = {b_s}: closed form infeasible"))?;
                ensure!((a - c).abs() <= 1e-8, "b_s = {b_s}: alpha {a} vs closed form {c}");
                found.push(format!("{a:.10}"));
            }
            (Err(Error::Infeasible), None) => {
                ensure!(closed.is_none(), "b_s = {b_s}: closed form feasible");
                found.push("infeasible".into());
            }
            (got, _) => return Err(format!("b_s = {b_s}: got {got:?}")),
        }
    }
    Ok(format!("alpha = [{}]", found.join(", ")))
}

fn sweep_fixtures() -> Vec<(&'static str, Network)> {
    let mut v = desk_fixtures();
    v.push(("six_bus_mesh", fixtures::six_bus_mesh()));
    v
}

fn continuous_limit(net: &Network, r0: &TapState) -> voltstab::Result<Verdict> {
    let cfg = ContinuousConfig {
        horizon: 500.0,
        dt: Some(0.02),
        sample_stride: 1000,
    };
    Ok(integrate_with(net, r0, &cfg, &[])?.verdict)
}

fn discrete_limit(net: &Network, r0: &TapState) -> voltstab::Result<Verdict> {
    Ok(simulate_discrete(net, r0, &DiscreteLtcConfig::defaults(net.n_load()), 500, &[])?.verdict)
}

fn converges_to(verdict: &Verdict, alpha: &TapState, tol: f64) -> bool {
    matches!(verdict, Verdict::Converged { limit } if limit.distance(alpha) <= tol)
}

/// Soundness of the certificate and of the support plan at one `r0`.
/// Returns whether `r0` certified stable.
fn check_soundness(net: &Network, alpha: &TapState, r0: &TapState) -> std::result::Result<bool, String> {
    let cert = monitor::certify_stability(net, r0).map_err(fail("certify"))?;
    if cert.is_stable() {
        let v = continuous_limit(net, r0).map_err(fail("simulate"))?;
        ensure!(converges_to(&v, alpha, 1e-3), "certified stable but continuous run ended {v:?}");
        return Ok(true);
    }
    let plan = monitor::compute_support(net, r0).map_err(fail("support"))?;
    let reduced = monitor::reduced_network(net, &plan).map_err(fail("reduce"))?;
    let v = continuous_limit(&reduced, r0).map_err(fail("simulate reduced"))?;
    ensure!(
        converges_to(&v, &plan.post_support_alpha, 1e-3),
        "support d = {:?}: continuous run ended {v:?}",
        plan.d
    );
    let v = discrete_limit(&reduced, r0).map_err(fail("discrete reduced"))?;
    ensure!(v.is_converged(), "support d = {:?}: discrete run ended {v:?}", plan.d);
    Ok(false)
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut summary = Vec::new();
    for (k, (name, net)) in sweep_fixtures().into_iter().enumerate() {
        let alpha = find_alpha(&net, &AlphaOptions::default()).map_err(fail(name))?.r_star;
        let mut rng = common::rng(600 + k as u64);
        let mut stable = 0;
        for _ in 0..100 {
            let r0 = TapState::new(alpha.iter().map(|a| a * rng.random_range(0.2..1.3)).collect());
            if check_soundness(&net, &alpha, &r0).map_err(|e| format!("{name} at r0 = {r0:?}: {e}"))? {
                stable += 1;
            }
        }
        summary.push(format!("{name} {stable}/{}", 100 - stable));
    }
    Ok(format!(
        "stable/support per fixture [{}], no counterexamples, {:.1} s",
        summary.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_7() -> Outcome {
    let net = fixtures::one_load();
    let r0 = TapState::new(vec![0.2]);
    let (resid, _, u) = common::one_load_support_oracle(1.0, 0.1875, 1.0, 1.0, 0.2);
    let want_d = resid / u;
    let plan = monitor::compute_support(&net, &r0).map_err(fail("support"))?;
    ensure!(
        (plan.residual_norm - resid).abs() <= 1e-6,
        "residual norm {} vs oracle {resid}",
        plan.residual_norm
    );
    ensure!((plan.d[0] - want_d).abs() <= 1e-6, "d {} vs oracle {want_d}", plan.d[0]);
    Ok(format!(
        "residual norm {:.9} (oracle {resid:.9}), d {:.9} (oracle {want_d:.9})",
        plan.residual_norm, plan.d[0]
    ))
}

fn centralized(net: &Network, r0: &TapState) -> voltstab::Result<f64> {
    Ok(monitor::solve_surrogate(net, r0, SurrogateOptions::default(), monitor::CERTIFY_TOL)?.objective)
}

/// ADMM against the centralized optimum; returns the iteration count.
fn check_admm(net: &Network, r0: &TapState, part: &Partition) -> std::result::Result<usize, String> {
    let opts = AdmmOptions::default();
    let want = centralized(net, r0).map_err(fail("centralized"))?;
    let rep = admm::run(net, r0, part, &opts).map_err(fail("admm"))?;
    ensure!(rep.verdict == AdmmVerdict::Converged, "ADMM stopped at {:?}", rep.verdict);
    let got = rep.objective();
    let err = if want <= monitor::ZERO_TOL {
        (got - want).abs()
    } else {
        (got - want).abs() / want
    };
    ensure!(err <= 1e-4, "objective {got} vs centralized {want} (error {err:e})");
    let primal = rep.primal_residual_history.last().copied().unwrap_or(f64::NAN);
    let dual = rep.dual_residual_history.last().copied().unwrap_or(f64::NAN);
    ensure!(
        primal <= opts.tol && dual <= opts.tol,
        "consensus residuals {primal:e} / {dual:e}"
    );
    let again = admm::run(net, r0, part, &opts).map_err(fail("admm rerun"))?;
    ensure!(again == rep, "rerun differs");
    Ok(rep.iterations)
}

fn criterion_8() -> Outcome {
    // (network file, partitions, r0 as multiples of alpha)
    let cases: [(&str, &[&str], &[f64]); 5] = [
        ("one_load.json", &["single", "single_with_gen"], &[0.26 / 0.75, 0.2 / 0.75]),
        ("two_load_chain.json", &["single", "two_load_split.json"], &[0.6, 0.15]),
        ("two_load_symmetric.json", &["single", "two_load_split.json"], &[0.9, 0.15]),
        ("three_load.json", &["single", "three_load_split.json"], &[0.9, 0.5]),
        ("six_bus_mesh.json", &["six_bus_split.json", "six_bus_ring.json"], &[0.9, 0.3]),
    ];
    let mut summary = Vec::new();
    for (netfile, parts, scales) in cases {
        let start = Instant::now();
        let net = load(netfile);
        let alpha = find_alpha(&net, &AlphaOptions::default()).map_err(fail(netfile))?.r_star;
        for &p in parts {
            let part = match p {
                "single" => Partition::single(&net),
                "single_with_gen" => {
                    let all = (0..net.n_load() + net.n_gen()).map(|i| (i, 0)).collect();
                    admm::build_partition(&net, &all).map_err(fail(p))?
                }
                f => partition(&net, f),
            };
            for &s in scales {
                let r0 = TapState::new(alpha.iter().map(|a| a * s).collect());
                let iters = check_admm(&net, &r0, &part).map_err(|e| format!("{netfile} / {p} at {s} alpha: {e}"))?;
                summary.push(iters.to_string());
            }
        }
        within_time(start, Duration::from_secs(60)).map_err(|e| format!("{netfile}: {e}"))?;
    }
    Ok(format!("all converged, iterations [{}]", summary.join(" ")))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let net = load("grid_6x6.json");
    ensure!(net.n_load() + net.n_gen() >= 30, "grid has only {} buses", net.n_load() + net.n_gen());
    let alpha = find_alpha(&net, &AlphaOptions::default()).map_err(fail("alpha"))?.r_star;

    // invariant 6 at a stable and at a stressed operating point
    let calm = TapState::new(alpha.iter().map(|a| a * 0.95).collect());
    ensure!(
        check_soundness(&net, &alpha, &calm)?,
        "0.95 alpha did not certify on the grid"
    );
    let r0 = TapState::new(alpha.iter().map(|a| a * 0.3).collect());
    let cert = monitor::certify_stability(&net, &r0).map_err(fail("monitor"))?;
    let Certificate::NeedsSupport { .. } = cert else {
        return Err("0.3 alpha unexpectedly certified".into());
    };
    check_soundness(&net, &alpha, &r0)?;
    let plan = monitor::compute_support(&net, &r0).map_err(fail("support"))?;

    // invariant 8 on both checked-in partitions
    let mut iters = Vec::new();
    for p in ["grid_6x6_2_agents.json", "grid_6x6_3_agents.json"] {
        iters.push(check_admm(&net, &r0, &partition(&net, p)).map_err(|e| format!("{p}: {e}"))?);
    }
    Ok(format!(
        "{} buses: support {:.2}%, ADMM iterations {iters:?}, {:.1} s (IEEE 39-bus figures are not reproducible without its data)",
        net.n_load() + net.n_gen(),
        plan.percentage,
        start.elapsed().as_secs_f64()
    ))
}

/// Independent KKT check from the reported duals.
fn kkt_from_duals(p: &ConicProblem, sol: &ConicSolution) -> f64 {
    let x = &sol.x;
    let at = p.a.transpose();
    let mut grad = &at * (&p.a * x - &p.b) * 2.0;
    let mut k = 0;
    for i in 0..p.ineq.nrows() {
        grad += p.ineq.row(i).transpose() * sol.linear_duals[k];
        k += 1;
    }
    for (j, l) in p.lower.iter().enumerate() {
        if l.is_finite() {
            grad[j] -= sol.linear_duals[k];
            k += 1;
        }
    }
    for (h, mu) in p.hyperbolic.iter().zip(sol.hyperbolic_duals.iter()) {
        grad[h.u] -= mu * x[h.v];
        grad[h.v] -= mu * x[h.u];
    }
    let scale = 1.0 + (&at * &p.b).amax();
    let mut compl: f64 = 0.0;
    let slack = &p.ineq_rhs - &p.ineq * x;
    for i in 0..p.ineq.nrows() {
        compl = compl.max(sol.linear_duals[i] * slack[i]);
    }
    (grad.amax() / scale).max(compl).max(p.max_violation(x))
}

fn criterion_10() -> Outcome {
    let mut rng = common::rng(1000);

    // Jacobian against central differences
    let mut worst_jac: f64 = 0.0;
    for seed in 0..20 {
        let n = 1 + seed as usize % 5;
        let net = common::random_network(seed, n, 1 + seed as usize % 2, 0.08);
        let Ok(alpha) = find_alpha(&net, &AlphaOptions::default()) else {
            continue;
        };
        for _ in 0..5 {
            let r = TapState::new(alpha.r_star.iter().map(|a| a * rng.random_range(0.5..1.3)).collect());
            let analytic = jacobian(&net, &r).map_err(fail("jacobian"))?;
            let f = |x: &[f64]| {
                voltstab::dynamics::rhs(&net, &TapState::new(x.to_vec()))
                    .expect("rhs")
                    .iter()
                    .copied()
                    .collect()
            };
            let fd = common::finite_jacobian(f, r.as_slice(), 1e-6);
            let rel = (&analytic - &fd).amax() / analytic.amax().max(1e-12);
            worst_jac = worst_jac.max(rel);
        }
    }
    ensure!(worst_jac <= 1e-5, "Jacobian relative error {worst_jac:e}");

    // projection idempotence
    let mut worst_proj: f64 = 0.0;
    for _ in 0..10_000 {
        let (u, v, k) = (
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(0.0..3.0),
        );
        let (pu, pv) = conic::project_hyperbolic(u, v, k);
        let (qu, qv) = conic::project_hyperbolic(pu, pv, k);
        worst_proj = worst_proj.max((qu - pu).abs()).max((qv - pv).abs());
    }
    ensure!(worst_proj <= 1e-12, "projection moved a projected point by {worst_proj:e}");

    // KKT at every Optimal: surrogates on random networks plus random conic programs
    let mut worst_kkt: f64 = 0.0;
    let mut optimal = 0;
    let mut check = |p: &ConicProblem, sol: &ConicSolution| -> std::result::Result<(), String> {
        if sol.is_optimal() {
            optimal += 1;
            let own = kkt_from_duals(p, sol);
            worst_kkt = worst_kkt.max(sol.kkt_residual).max(own);
            ensure!(
                sol.kkt_residual <= 1e-6 && own <= 1e-6,
                "KKT residual {:e} (reported), {own:e} (recomputed), {} variables",
                sol.kkt_residual,
                p.n_vars()
            );
        }
        Ok(())
    };
    for seed in 0..20 {
        let n = 1 + seed as usize % 6;
        let net = common::random_network(100 + seed, n, 1 + seed as usize % 3, 0.1);
        let r0 = TapState::new((0..n).map(|_| rng.random_range(0.2..1.2)).collect());
        let p = monitor::build_surrogate(&net, &r0, SurrogateOptions::default()).map_err(fail("surrogate"))?;
        for tol in [1e-8, monitor::CERTIFY_TOL] {
            let opts = ConicOptions {
                tol,
                max_iter: 400,
                x0: Some(monitor::surrogate_start(&net, &r0)),
                trace: false,
            };
            let sol = conic::solve(&p, &opts).map_err(fail("solve"))?;
            check(&p, &sol)?;
        }
    }
    for _ in 0..40 {
        let n = rng.random_range(2..6);
        let m = rng.random_range(n..n + 4);
        let a = nalgebra::DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
        let mut p = ConicProblem::least_squares(a, b);
        p.add_hyperbolic(0, 1, rng.random_range(0.1..1.0));
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
        p.add_ineq(&row, rng.random_range(1.0..3.0));
        let sol = conic::solve(&p, &ConicOptions::default()).map_err(fail("solve"))?;
        check(&p, &sol)?;
    }
    ensure!(optimal > 0, "no Optimal solves to check");
    Ok(format!(
        "Jacobian rel error {worst_jac:.1e}, projection drift {worst_proj:.1e}, worst KKT {worst_kkt:.1e} over {optimal} solves"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("two-bus equilibria", criterion_1),
        ("two-bus dynamics", criterion_2),
        ("two-bus contingency", criterion_3),
        ("equilibrium suite", criterion_4),
        ("fixed-point alpha", criterion_5),
        ("certificate soundness", criterion_6),
        ("support exactness", criterion_7),
        ("ADMM equivalence", criterion_8),
        ("large-network pipeline", criterion_9),
        ("numerical hygiene", criterion_10),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        match run() {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
