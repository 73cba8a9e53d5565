//! Bundled networks.

use crate::grid::GridModel;
use crate::topology::TransportNetwork;

pub const NGUYEN_DUPUIS: &str = include_str!("../data/nguyen_dupuis.toml");
pub const DESK6: &str = include_str!("../data/desk6.toml");
pub const MICRO3: &str = include_str!("../data/micro3.toml");
pub const IEEE33: &str = include_str!("../data/ieee33.toml");
pub const MICRO_GRID: &str = include_str!("../data/micro_grid.toml");

pub fn nguyen_dupuis() -> TransportNetwork {
    TransportNetwork::from_toml_str(NGUYEN_DUPUIS).expect("bundled network")
}

pub fn desk6() -> TransportNetwork {
    TransportNetwork::from_toml_str(DESK6).expect("bundled network")
}

pub fn micro3() -> TransportNetwork {
    TransportNetwork::from_toml_str(MICRO3).expect("bundled network")
}

pub fn ieee33() -> GridModel {
    GridModel::from_toml_str(IEEE33).expect("bundled grid")
}

pub fn micro_grid() -> GridModel {
    GridModel::from_toml_str(MICRO_GRID).expect("bundled grid")
}

/// Looks up a bundled transport network by name.
pub fn transport_by_name(name: &str) -> Option<TransportNetwork> {
    match name {
        "nguyen-dupuis" => Some(nguyen_dupuis()),
        "desk6" => Some(desk6()),
        "micro3" => Some(micro3()),
        _ => None,
    }
}

pub fn grid_by_name(name: &str) -> Option<GridModel> {
    match name {
        "ieee33" => Some(ieee33()),
        "micro3" => Some(micro_grid()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_files_parse() {
        assert_eq!(nguyen_dupuis().nodes.len(), 13);
        assert_eq!(nguyen_dupuis().arcs.len(), 38);
        assert_eq!(desk6().nodes.len(), 6);
        let g = ieee33();
        assert_eq!(g.network.buses.len(), 33);
        assert_eq!(g.network.lines.len(), 32);
        let total: f64 = g.network.nominal_load.iter().map(|l| l.0).sum();
        assert!((total - 3715.0).abs() < 1e-9);
        g.validate().unwrap();
        micro_grid().validate().unwrap();
    }
}
