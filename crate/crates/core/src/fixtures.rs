//! The bundled 15-pipe, 11-node example network in its gas and water
//! variants. Node demands are the per-node balances of the published
//! initial flow pattern (7000 m³/h enters at node 1).

use crate::io::parse_network_str;
use crate::network::Network;

pub const GAS_NETWORK_JSON: &str = include_str!("../fixtures/gas_network.json");
pub const WATER_NETWORK_JSON: &str = include_str!("../fixtures/water_network.json");

pub fn gas_network() -> Network {
    parse_network_str(GAS_NETWORK_JSON).expect("bundled gas network is valid")
}

pub fn water_network() -> Network {
    parse_network_str(WATER_NETWORK_JSON).expect("bundled water network is valid")
}
