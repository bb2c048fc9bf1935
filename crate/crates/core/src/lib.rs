//! Simulation and repair of dangerous-container placement in a terminal
//! yard block.
//!
//! The block is a 3D grid of cells ([`yard`]), containers are agents whose
//! fitness counts the separation rules they violate ([`rules`]), and two
//! relocation strategies repair unsafe configurations while counting
//! movements ([`strategy`]). [`oracle`] holds brute-force reference checks
//! and [`experiment`] runs seeded batches and parameter sweeps.

pub mod experiment;
pub mod oracle;
pub mod rules;
pub mod strategy;
pub mod trace;
pub mod yard;

pub use rules::{BlockFitness, SeparationRule, SeparationRuleMatrix, WeightedFitness, WeightingPolicy};
pub use strategy::{MoveCause, MoveRecord, RunOutcome, RunStatus, Strategy, StrategyParams};
pub use yard::{ContainerId, ContainerType, Coordinate, YardConfiguration, YardDimensions};
