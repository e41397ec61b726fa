//! Bundled function families.

mod controls;
mod routing;

use thiserror::Error;

pub use controls::{
    build_min_consensus, build_negative_controls, Constant, EpochConstant, Flip, Identity, MinConsensus,
    NegativeControls, Pinned,
};
pub use routing::{build_min_routing, PathCost, RoutingDistance, RoutingEpoch, RoutingFamily, RoutingInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("invalid family `{key}`: {reason}")]
    InvalidInstance { key: &'static str, reason: String },
}
