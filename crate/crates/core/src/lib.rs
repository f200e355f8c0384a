//! Deterministic simulation core for adaptive neighbor selection in a
//! blockchain peer-to-peer overlay.
//!
//! The crate is `no_std` (it needs `alloc`) and free of IO: it builds network
//! profiles and latency models, generates baseline topologies, floods blocks
//! over a topology, scores neighbors with three Perigee variants, and computes
//! coverage-delay, stretch and histogram metrics. File formats, scenarios and
//! the command-line harness live in the `perigee-sim` crate.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod latency;
pub mod metrics;
pub mod model;
pub mod propagation;
pub mod rng;
pub mod scoring;
pub mod topology;

pub use latency::{HypercubeModel, LatencyModel, LinkLatencies, RegionMatrix, RegionMatrixModel};
pub use model::{build_network, DegreeConfig, NetworkSpec, NodeId, NodeProfile, RegionId, RoundConfig};
pub use propagation::{propagate_block, BlockTrace, ObservationSet, NEVER};
pub use rng::SeededRng;
pub use scoring::{Perigee, PercentileSpec, ScoringMethod};
pub use topology::{Adjacency, Topology};
