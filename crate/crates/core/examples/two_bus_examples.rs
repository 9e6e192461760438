//! Two-bus equilibria, the critical susceptance of a constant power factor
//! family, and the tap dynamics before and after a reactance step with and
//! without load relief.

use voltstab::twobus::{
    critical_susceptance, simulate_twobus, tap_equilibria, LoadFamily, TwoBusChange, TwoBusEvent, TwoBusParams,
};

fn main() -> voltstab::Result<()> {
    let p = TwoBusParams {
        e: 1.0,
        r: 0.0,
        x: 1.0,
        g_l: 0.8,
        b_l: 0.4,
        v0: 1.0,
        t: 1.0,
    };
    println!("equilibria: {:?}", tap_equilibria(&p));
    let crit = critical_susceptance(&LoadFamily::power_factor(&p, 2.0))?;
    println!("critical B_L for G_L = 2 B_L: {:.9}", crit.b_l);

    for r0 in [0.9, 0.89] {
        let traj = simulate_twobus(&p, r0, 100.0, &[], None)?;
        println!("r0 = {r0}: {:?}", traj.verdict);
    }

    let trip = TwoBusEvent {
        time: 10.0,
        change: TwoBusChange::ScaleReactance(1.2),
    };
    let relief = TwoBusEvent {
        time: 11.0,
        change: TwoBusChange::ScaleLoad(0.7),
    };
    let without = simulate_twobus(&p, 1.0, 60.0, &[trip], None)?;
    let with = simulate_twobus(&p, 1.0, 60.0, &[trip, relief], None)?;
    println!("X x1.2 at t=10: {:?}", without.verdict);
    println!("plus load x0.7 at t=11: {:?}", with.verdict);
    Ok(())
}
