//! Bundled case files.

use crate::network::Network;

pub const CASE33: &str = include_str!("../data/case33.json");
pub const CASE33_R17114: &str = include_str!("../data/case33_r17114.json");
pub const TWO_BUS: &str = include_str!("../data/two_bus.json");
pub const TRIANGLE: &str = include_str!("../data/triangle.json");
pub const ZERO_LOAD: &str = include_str!("../data/zero_load.json");

/// Version tag of the bundled datasets.
pub const DATASET_VERSION: &str = "case33-bw-1";

/// Tie lines of the 33-bus feeder, open in its initial configuration.
pub const CASE33_TIE_LINES: [u32; 5] = [33, 34, 35, 36, 37];

pub fn case33() -> Network {
    Network::from_json(CASE33).expect("bundled case33 is valid")
}

pub fn case33_r17114() -> Network {
    Network::from_json(CASE33_R17114).expect("bundled case33 variant is valid")
}

pub fn two_bus() -> Network {
    Network::from_json(TWO_BUS).expect("bundled two-bus case is valid")
}

pub fn triangle() -> Network {
    Network::from_json(TRIANGLE).expect("bundled triangle case is valid")
}

pub fn zero_load() -> Network {
    Network::from_json(ZERO_LOAD).expect("bundled zero-load case is valid")
}
