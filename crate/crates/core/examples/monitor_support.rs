//! Stability certificate for a tap position and, when it fails, the minimal
//! load reduction that recaptures it.

use voltstab::dynamics::{integrate_continuous, TapState};
use voltstab::fixtures;
use voltstab::monitor::{certify_stability, compute_support, reduced_network};

fn main() -> voltstab::Result<()> {
    let net = fixtures::one_load();
    for r in [0.5, 0.2] {
        let r0 = TapState::new(vec![r]);
        let cert = certify_stability(&net, &r0)?;
        println!("r0 = {r}: stable = {}, optimal cost = {:.3e}", cert.is_stable(), cert.cost());
        if !cert.is_stable() {
            let plan = compute_support(&net, &r0)?;
            println!(
                "  reduce b_s by {:?} ({:.2}%), residual norm {:.6}",
                plan.d, plan.percentage, plan.residual_norm
            );
            let reduced = reduced_network(&net, &plan)?;
            let traj = integrate_continuous(&reduced, &r0, 200.0, None, &[])?;
            println!("  after support: {:?}", traj.verdict);
        }
    }

    let mesh = fixtures::six_bus_mesh();
    let r0 = TapState::uniform(mesh.n_load(), 0.25);
    let plan = compute_support(&mesh, &r0)?;
    println!("six-bus mesh at r = 0.25: d = {:?}, total {:.2}%", plan.d, plan.percentage);
    Ok(())
}
