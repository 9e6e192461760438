//! Property tests for the invariants of each module.

mod common;

use std::collections::BTreeMap;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

use voltstab::admm::{self, AdmmOptions, AdmmVerdict, Partition};
use voltstab::conic::{self, ConicOptions, ConicProblem};
use voltstab::dynamics::{
    integrate_with, simulate_discrete, ContinuousConfig, DiscreteLtcConfig, TapState, Verdict,
};
use voltstab::equilibria::{
    brute_force_equilibria, default_box, find_alpha, fixed_point_map, in_region_p, AlphaOptions, RegionCheck,
};
use voltstab::fixtures;
use voltstab::monitor::{self, Certificate, SurrogateOptions};
use voltstab::network::Network;
use voltstab::twobus::{quartic_coefficients, simulate_twobus, tap_equilibria, TapEquilibria, TwoBusParams};

fn taps_in(net: &Network, lo: f64, hi: f64, seed: u64) -> TapState {
    common::sample_taps(&mut common::rng(seed), net.n_load(), lo, hi)
}

fn alpha_of(net: &Network) -> Option<TapState> {
    find_alpha(net, &AlphaOptions::default()).ok().map(|e| e.r_star)
}

fn scaled(r: &TapState, s: f64) -> TapState {
    TapState::new(r.iter().map(|x| x * s).collect())
}

fn config(horizon: f64) -> ContinuousConfig {
    ContinuousConfig {
        horizon,
        dt: Some(0.02),
        sample_stride: 1,
    }
}

mod network {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inverse_is_positive_and_voltages_solve_the_system(
            seed in 0u64..10_000, n in 1usize..10, g in 1usize..4,
        ) {
            let net = common::random_network(seed, n, g, 0.2);
            let r = taps_in(&net, 0.3, 1.5, seed + 1);
            let b = net.b_ll(&r).unwrap();
            let inv = common::gauss_jordan_inverse(&b);
            prop_assert!(inv.iter().all(|x| *x > 0.0), "inverse has a non-positive entry");
            let v = net.load_voltages(&r).unwrap();
            let resid = (&b * &v.primary - net.h()).amax();
            prop_assert!(resid <= 1e-10 * net.h().amax());
            prop_assert!(v.primary.iter().all(|x| *x > 0.0));
        }

        #[test]
        fn voltage_scaling_is_linear(seed in 0u64..10_000, n in 1usize..8, gamma in 0.2f64..5.0) {
            let net = common::random_network(seed, n, 2, 0.2);
            let r = taps_in(&net, 0.3, 1.5, seed + 7);
            let base = net.load_voltages(&r).unwrap();
            let big = net.with_voltage_scale(gamma).unwrap();
            let sc = big.load_voltages(&r).unwrap();
            for i in 0..n {
                let rel = (sc.secondary[i] / gamma - base.secondary[i]).abs() / base.secondary[i];
                prop_assert!(rel <= 1e-12, "bus {i}: relative error {rel:e}");
            }
            prop_assert_eq!(
                in_region_p(&net, &r).unwrap().is_in(),
                in_region_p(&big, &r).unwrap().is_in()
            );
        }
    }
}

mod twobus {
    use super::*;

    fn params() -> impl Strategy<Value = TwoBusParams> {
        (0.9f64..1.1, 0.0f64..0.3, 0.3f64..1.5, 0.0f64..0.8, -0.2f64..0.6, 0.9f64..1.1, 0.5f64..3.0).prop_map(
            |(e, r, x, g_l, b_l, v0, t)| TwoBusParams { e, r, x, g_l, b_l, v0, t },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn roots_solve_the_quartic_and_hit_the_setpoint(p in params()) {
            if let TapEquilibria::Feasible { r_minus, r_plus } = tap_equilibria(&p) {
                let q = quartic_coefficients(&p);
                for r in [r_minus, r_plus] {
                    prop_assert!(q.eval(r).abs() <= 1e-9);
                    if r > 1e-6 {
                        prop_assert!((p.secondary_voltage(r) - p.v0).abs() <= 1e-9);
                    }
                }
            }
        }

        #[test]
        fn setpoint_is_met_exactly_between_the_roots(p in params()) {
            if let TapEquilibria::Feasible { r_minus, r_plus } = tap_equilibria(&p) {
                let band = 1e-6 * (1.0 + r_plus);
                for k in 1..400 {
                    let r = 2.0 * r_plus * k as f64 / 400.0;
                    let v = p.secondary_voltage(r);
                    if r > r_minus + band && r < r_plus - band {
                        prop_assert!(v > p.v0, "V2({r}) = {v} inside ({r_minus}, {r_plus})");
                    } else if r > r_plus + band || r < r_minus - band {
                        prop_assert!(v < p.v0, "V2({r}) = {v} outside [{r_minus}, {r_plus}]");
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn trajectories_follow_the_roots(p in params(), frac in 0.1f64..1.5) {
            let eq = tap_equilibria(&p);
            prop_assume!(matches!(eq, TapEquilibria::Feasible { .. }));
            let TapEquilibria::Feasible { r_minus, r_plus } = eq else { unreachable!() };
            // well-separated roots keep convergence fast enough for the horizon
            prop_assume!(r_plus - r_minus > 0.2 && r_minus > 0.05);
            let r0 = r_minus + frac * (r_plus - r_minus);
            let up = simulate_twobus(&p, r0, 200.0 * p.t, &[], None).unwrap();
            let Verdict::Converged { limit } = &up.verdict else {
                return Err(TestCaseError::fail(format!("from {r0}: {:?}", up.verdict)));
            };
            prop_assert!((limit[0] - r_plus).abs() <= 1e-4);

            let below = 0.9 * r_minus;
            let down = simulate_twobus(&p, below, 50.0 * p.t, &[], None).unwrap();
            for w in down.samples.windows(2) {
                prop_assert!(w[1].r <= w[0].r);
            }
        }
    }
}

mod dynamics {
    use super::*;

    /// Point of `P` between the smallest tap in `P` along the ray and `alpha`.
    fn point_in_p(net: &Network, alpha: &TapState, s: f64) -> Option<TapState> {
        let r = scaled(alpha, s);
        matches!(in_region_p(net, &r).ok()?, RegionCheck::InP(_)).then_some(r)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn region_p_is_invariant_and_trajectories_rise(
            seed in 0u64..10_000, n in 1usize..5, s in 0.5f64..1.0,
        ) {
            let net = common::random_network(seed, n, 2, 0.08);
            let alpha = alpha_of(&net);
            prop_assume!(alpha.is_some());
            let alpha = alpha.unwrap();
            let r0 = point_in_p(&net, &alpha, s);
            prop_assume!(r0.is_some());
            let r0 = r0.unwrap();
            let traj = integrate_with(&net, &r0, &config(400.0), &[]).unwrap();
            for w in traj.samples.windows(2) {
                prop_assert!(w[0].r.le(&w[1].r, 1e-12), "tap decreased inside P");
            }
            for smp in traj.samples.iter().step_by(50) {
                prop_assert!(in_region_p(&net, &smp.r).unwrap().is_in(), "left P at t = {}", smp.t);
            }
            let Verdict::Converged { limit } = &traj.verdict else {
                return Err(TestCaseError::fail(format!("{:?}", traj.verdict)));
            };
            prop_assert!(limit.distance(&alpha) <= 1e-4);
        }

        #[test]
        fn time_scaling_keeps_the_verdict(seed in 0u64..10_000, n in 1usize..4, s in 0.2f64..1.3) {
            let net = common::random_network(seed, n, 2, 0.1);
            let alpha = alpha_of(&net);
            prop_assume!(alpha.is_some());
            let alpha = alpha.unwrap();
            let r0 = scaled(&alpha, s);
            let kind = |v: &Verdict| std::mem::discriminant(v);
            let base = integrate_with(&net, &r0, &config(1000.0), &[]).unwrap().verdict;
            prop_assert!(base != Verdict::Undecided);
            for gamma in [0.5, 2.0] {
                let other = net.with_time_scale(gamma).unwrap();
                let v = integrate_with(&other, &r0, &config(1000.0 * gamma), &[]).unwrap().verdict;
                prop_assert_eq!(kind(&v), kind(&base), "gamma {}: {:?} vs {:?}", gamma, v, base);
            }
        }
    }

    #[test]
    fn discrete_and_continuous_agree_away_from_the_boundary() {
        // one-load fixture: the ROA boundary is r = 0.25
        let net = fixtures::one_load();
        let band = DiscreteLtcConfig::DEFAULT_STEP + DiscreteLtcConfig::DEFAULT_DEADBAND;
        let cfg = DiscreteLtcConfig::defaults(1);
        for k in 0..60 {
            let r = 0.05 + 1.2 * k as f64 / 59.0;
            if (r - 0.25).abs() <= band {
                continue;
            }
            let r0 = TapState::new(vec![r]);
            let cont = integrate_with(&net, &r0, &config(500.0), &[]).unwrap().verdict;
            let disc = simulate_discrete(&net, &r0, &cfg, 500, &[]).unwrap().verdict;
            assert_eq!(cont.is_converged(), disc.is_converged(), "r0 = {r}: {cont:?} vs {disc:?}");
            assert_eq!(cont.is_collapsed(), disc.is_collapsed(), "r0 = {r}");
        }
    }
}

mod equilibria {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn fixed_point_map_is_monotone_and_bounded(
            seed in 0u64..10_000, n in 1usize..8, bump in 0.0f64..0.5,
        ) {
            let net = common::random_network(seed, n, 2, 0.2);
            let mut rng = common::rng(seed ^ 0x5a5a);
            let r = common::sample_taps(&mut rng, n, 0.1, 2.0);
            let r2 = TapState::new(r.iter().map(|x| x + bump * rng.random_range(0.0..1.0)).collect());
            let (f, f2) = (fixed_point_map(&net, &r), fixed_point_map(&net, &r2));
            let cap = net.e_open().component_div(net.setpoints());
            for i in 0..n {
                prop_assert!(f2[i] >= f[i] - 1e-15);
                prop_assert!(f[i] < cap[i] && f2[i] < cap[i]);
            }
        }
    }

    #[test]
    fn equilibria_draw_the_nominal_reactive_power() {
        for net in [
            fixtures::one_load(),
            fixtures::two_load_chain(),
            fixtures::two_load_symmetric(),
            fixtures::three_load(),
        ] {
            let density = [2000, 400, 100][net.n_load() - 1];
            let eqs = brute_force_equilibria(&net, &default_box(&net, 0.005), density, 1e-12).unwrap();
            assert!(!eqs.is_empty());
            for eq in eqs {
                let v = net.load_voltages(&eq.r_star).unwrap();
                for i in 0..net.n_load() {
                    let b = net.load_susceptances()[i];
                    let q = v.secondary[i].powi(2) * b;
                    let want = net.setpoints()[i].powi(2) * b;
                    assert!((q - want).abs() <= 1e-8, "bus {i}: {q} vs {want}");
                }
            }
        }
    }
}

mod conic_solver {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn projection_is_idempotent(u in -10.0f64..10.0, v in -10.0f64..10.0, k in 0.0f64..4.0) {
            let (pu, pv) = conic::project_hyperbolic(u, v, k);
            prop_assert!(pu >= 0.0 && pv >= 0.0);
            prop_assert!(pu * pv >= k * k * (1.0 - 1e-12) - 1e-12);
            let (qu, qv) = conic::project_hyperbolic(pu, pv, k);
            prop_assert!((qu - pu).abs() <= 1e-12 && (qv - pv).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_beats_sampled_feasible_points() {
        let mut rng = common::rng(77);
        let k = 1.3;
        let feasible: Vec<(f64, f64)> = (0..10_000)
            .map(|_| {
                let u: f64 = rng.random_range(0.05..8.0);
                let v = k * k / u + rng.random_range(0.0..2.0) * rng.random_range(0.0..1.0f64).powi(3);
                (u, v)
            })
            .collect();
        for _ in 0..1000 {
            let (u, v) = (rng.random_range(-4.0..6.0), rng.random_range(-4.0..6.0));
            let (pu, pv) = conic::project_hyperbolic(u, v, k);
            let d = (pu - u).hypot(pv - v);
            let best = feasible.iter().map(|(a, b)| (a - u).hypot(b - v)).fold(f64::INFINITY, f64::min);
            assert!(d <= best + 1e-12, "({u}, {v}): projection at {d}, sample at {best}");
        }
    }

    fn random_problem(seed: u64) -> (ConicProblem, Vec<DVector<f64>>) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(2..6);
        let m = rng.random_range(n..n + 4);
        let a = nalgebra::DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
        let mut p = ConicProblem::least_squares(a, b);
        p.add_hyperbolic(0, 1, rng.random_range(0.1..1.0));
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
        p.add_ineq(&row, rng.random_range(1.0..3.0));
        let points = (0..2000)
            .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0)))
            .filter(|x| p.max_violation(x) <= 0.0)
            .collect();
        (p, points)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_points_are_feasible_certified_and_minimal(seed in 0u64..100_000) {
            let (p, points) = random_problem(seed);
            let tol = 1e-8;
            let sol = conic::solve(&p, &ConicOptions::with_tol(tol)).unwrap();
            if sol.is_optimal() {
                prop_assert!(p.max_violation(&sol.x) <= 1e-8);
                prop_assert!(sol.kkt_residual <= tol.max(1e-7));
                for x in &points {
                    prop_assert!(sol.objective <= p.objective(x) + tol);
                }
            }
        }
    }
}

mod monitoring {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn certificates_are_consistent(seed in 0u64..10_000, n in 1usize..6, s in 0.2f64..1.2) {
            let net = common::random_network(seed, n, 2, 0.1);
            let alpha = alpha_of(&net);
            prop_assume!(alpha.is_some());
            let alpha = alpha.unwrap();
            let r0 = scaled(&alpha, s);
            let cert = monitor::certify_stability(&net, &r0).unwrap();
            prop_assert_eq!(cert.is_stable(), cert.cost() <= monitor::ZERO_TOL);
            let (Certificate::Stable { v, u, .. } | Certificate::NeedsSupport { v, u, .. }) = &cert;
            for i in 0..n {
                let v0 = net.setpoints()[i];
                prop_assert!(u[i] * v[i] >= v0 * v0 - 1e-8);
                prop_assert!(u[i] >= v[i] / (r0[i] * r0[i]) - 1e-8);
                prop_assert!(v[i] >= -1e-8);
            }
            if let Certificate::Stable { witness, .. } = &cert {
                prop_assert!(witness.r.le(&r0, 1e-12));
                prop_assert!(in_region_p(&net, &witness.r).unwrap().is_in());
            }

            // the support-bound rows do not change the zero/nonzero status
            let loose = monitor::certify_with(&net, &r0, SurrogateOptions { support_bound: false }, monitor::ZERO_TOL)
                .unwrap();
            prop_assert_eq!(loose.cost() <= monitor::ZERO_TOL, cert.cost() <= monitor::ZERO_TOL);

            // upward closed in r0
            if cert.is_stable() {
                let higher = scaled(&r0, 1.1);
                prop_assert!(monitor::certify_stability(&net, &higher).unwrap().is_stable());
            }

            if !cert.is_stable() {
                let plan = monitor::compute_support(&net, &r0).unwrap();
                for i in 0..n {
                    prop_assert!(plan.d[i] >= 0.0 && plan.d[i] <= net.load_susceptances()[i]);
                }
                let reduced = monitor::reduced_network(&net, &plan).unwrap();
                let cont = integrate_with(&reduced, &r0, &config(500.0), &[]).unwrap().verdict;
                prop_assert!(cont.is_converged(), "continuous on reduced: {:?}", cont);
                let cfg = DiscreteLtcConfig::defaults(n);
                let disc = simulate_discrete(&reduced, &r0, &cfg, 500, &[]).unwrap().verdict;
                prop_assert!(disc.is_converged(), "discrete on reduced: {:?}", disc);
            }
        }
    }
}

mod distributed {
    use super::*;

    fn six_bus_partitions(net: &Network) -> Vec<Partition> {
        let maps: [&[(usize, usize)]; 2] = [&[(0, 0), (1, 0), (2, 1), (3, 1)], &[(0, 0), (1, 1), (2, 2), (3, 3)]];
        let mut out = vec![Partition::single(net)];
        for m in maps {
            let assignment: BTreeMap<usize, usize> = m.iter().copied().collect();
            out.push(admm::build_partition(net, &assignment).unwrap());
        }
        out
    }

    #[test]
    fn consensus_partition_invariance_and_determinism() {
        let net = fixtures::six_bus_mesh();
        let alpha = alpha_of(&net).unwrap();
        let r0 = scaled(&alpha, 0.3);
        let opts = AdmmOptions::default();
        let mut objectives = Vec::new();
        for part in six_bus_partitions(&net) {
            let rep = admm::run(&net, &r0, &part, &opts).unwrap();
            assert_eq!(rep.verdict, AdmmVerdict::Converged);
            assert_eq!(rep.objective_history.len(), rep.iterations);
            assert_eq!(rep.primal_residual_history.len(), rep.iterations);
            assert_eq!(rep.dual_residual_history.len(), rep.iterations);
            assert!(*rep.primal_residual_history.last().unwrap() <= opts.tol);
            for (&bus, &z) in &rep.z {
                assert!((rep.v[bus] - z).abs() <= opts.tol, "bus {bus}: V {} vs z {z}", rep.v[bus]);
            }
            let again = admm::run(&net, &r0, &part, &opts).unwrap();
            assert_eq!(again, rep);
            let serial = admm::run(&net, &r0, &part, &AdmmOptions { parallel: false, ..opts.clone() }).unwrap();
            assert_eq!(serial, rep);
            objectives.push(rep.objective());
        }
        let spread = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - objectives.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 2.0 * opts.tol, "objectives {objectives:?}");
    }
}
