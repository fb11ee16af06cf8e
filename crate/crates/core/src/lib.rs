//! Localization of IoT end-nodes from noisy pairwise distances and
//! power-aware topology extraction over the result.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anchored;
pub mod eigen;
pub mod error;
pub mod graph;
pub mod localize_patch;
pub mod metrics;
pub mod model;
pub mod patches;
pub mod power;
pub mod rateopt;
pub mod realize;
pub mod rigidity;
pub mod sync;
pub mod topology;

pub use error::{Error, Result};
pub use metrics::{localization_error, procrustes_align, ProcrustesFit};
pub use model::{generate_network, perturb_distances, CommRange, DistanceMeasurements, Network, NetworkSpec, Region};
pub use power::PowerConfig;
pub use rateopt::{RateDirection, RateInstance, RateSolution};
pub use realize::{localize, Localization, LocalizeOptions};
pub use topology::{brute_force_power, iotntop, lmst_topology, IoTNTopOptions, IoTNTopTrace, Layout, Topology};

/// Global node id: end-nodes first, then gateways.
pub type NodeId = usize;
