pub mod boxtrace;
pub mod cli;
pub mod conditions;
pub mod engine;
pub mod families;
pub mod harness;
pub mod nodes;
pub mod pseudocycle;
pub mod schedule;
