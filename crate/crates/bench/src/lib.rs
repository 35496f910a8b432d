//! Benchmark inputs shared by the criterion targets.

use loopflow::{fixtures, LoopBasis, Network, SizingConfig};

/// Gas fixture with every diameter scaled so sizing has work to do.
pub fn perturbed_gas_network() -> Network {
    fixtures::gas_network().map_diameters(|p| p.diameter * if p.id.0 % 2 == 0 { 1.1 } else { 0.95 })
}

/// Sizing config holding the balanced flows of the unperturbed gas fixture.
pub fn balanced_sizing_config() -> SizingConfig {
    let net = fixtures::gas_network();
    let r = loopflow::solve(&net, &loopflow::SolverConfig::default()).expect("fixture solves");
    SizingConfig::new(r.final_flows().clone())
}

/// Loop basis used by the sizing benchmark.
pub fn basis(net: &Network) -> LoopBasis {
    loopflow::topology::loop_basis(net).expect("fixture has loops")
}
