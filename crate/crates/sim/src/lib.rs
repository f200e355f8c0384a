//! Experiment harness for the `perigee-core` simulator: scenario files,
//! multi-seed orchestration, CSV artifacts, cross-run comparison and the
//! hypercube stretch experiment. The `perigee` binary is a thin CLI over
//! this library.

pub mod compare;
pub mod error;
pub mod files;
pub mod harness;
pub mod scenario;
pub mod stretch;

pub use error::{Result, SimError};
pub use harness::{run_scenario, simulate, RunOptions, ScenarioResult};
pub use scenario::{load_scenario, parse_scenario, preset, Algorithm, Scenario};
