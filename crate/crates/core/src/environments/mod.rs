//! Simulation environments and task generators.

pub mod miner;
pub mod random;
pub mod two_state;

pub use miner::{build_miner, MinerGridworld, MinerLayout, MinerModel, MinerPolicies, MinerSetup, MinerTask};
pub use random::{random_task, RandomTaskError, RandomTaskLimits};
pub use two_state::build_two_state;
