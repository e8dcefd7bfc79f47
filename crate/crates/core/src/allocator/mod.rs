//! Fast-timescale per-node GPU/CPU allocation: RAN floors plus square-root
//! active-set water-filling, and the residual-sharing rules used by baselines.

mod floors;
mod node;
mod solve;

use thiserror::Error;

use crate::model::RequestId;

pub use floors::{aggregate_load, compute_ran_floor, ActiveWork, DownstreamEstimator};
pub use node::{allocate_node, AllocRule, NodeAllocation};
pub use solve::{solve_resource, sqrt_active_set, InstanceLoad};

/// Default urgency clamp, seconds.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("RAN floors {floor_sum} exceed capacity {capacity}")]
    FloorOverflow { floor_sum: f64, capacity: f64 },
    #[error("request {request_id} cannot meet its RAN deadline (slack after overheads {slack} s)")]
    InfeasibleFloor { request_id: RequestId, slack: f64 },
}
