//! Routing experiments on multi-core elastic optical networks.
//!
//! A discrete-event simulator in which learning agents (epsilon-greedy and
//! UCB bandits, tabular Q-learning) and length-ordered baselines pick paths
//! for dynamic lightpath requests. A controller assigns modulation by reach
//! and places each lightpath first-fit across cores and spectrum.

pub mod agents;
pub mod config;
pub mod engine;
pub mod grid;
pub mod harness;
pub mod presets;
pub mod rsa;
pub mod topology;
pub mod traffic;

pub use config::RunConfig;
pub use engine::{Algorithm, ExperimentConfig, ExperimentResult, Simulation};
pub use topology::Topology;
