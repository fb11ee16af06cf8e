//! Fixtures shared by the benchmarks.

use netweave_core::model::{CommRange, NetworkSpec, Region};
use netweave_core::{generate_network, perturb_distances, DistanceMeasurements, Network};

/// Network in a 4 km square with mean end-node degree in `[14, 20]`.
pub fn fixture(nodes: usize, gateways: usize, eta: f64, seed: u64) -> (Network, DistanceMeasurements) {
    let spec = NetworkSpec {
        num_end_nodes: nodes,
        num_gateways: gateways,
        region: Region::square(4000.0),
        comm_range: CommRange::MeanDegree { min: 14.0, max: 20.0 },
        gateway_range: None,
        seed,
    };
    let network = generate_network(&spec).expect("valid spec");
    let measurements = perturb_distances(&network, eta, seed).expect("valid noise factor");
    (network, measurements)
}
