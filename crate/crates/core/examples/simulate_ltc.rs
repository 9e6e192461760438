//! Continuous and discrete LTC trajectories on a two-load chain, including a
//! line weakening event, written as CSV to the working directory.

use std::fs::File;

use voltstab::dynamics::{
    integrate_continuous, simulate_discrete, DiscreteLtcConfig, NetworkChange, NetworkEvent, TapState,
};
use voltstab::fixtures;

fn main() -> voltstab::Result<()> {
    let net = fixtures::two_load_chain();
    let r0 = TapState::new(vec![0.6, 0.6]);
    let events = [NetworkEvent {
        time: 20.0,
        change: NetworkChange::ScaleLine { from: 0, to: 1, factor: 0.8 },
    }];

    let cont = integrate_continuous(&net, &r0, 200.0, None, &events)?;
    println!("continuous: {:?}", cont.verdict);
    cont.write_csv(File::create("simulate_ltc_continuous.csv")?)?;

    let cfg = DiscreteLtcConfig::defaults(net.n_load());
    let disc = simulate_discrete(&net, &r0, &cfg, 400, &events)?;
    println!("discrete:   {:?}", disc.verdict);
    disc.write_csv(File::create("simulate_ltc_discrete.csv")?)?;
    Ok(())
}
