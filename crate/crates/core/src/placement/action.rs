use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Cluster, InstanceId, NodeId, Placement};

/// A single-instance migration, or doing nothing this epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MigrationAction {
    NoOp,
    Move { instance_id: InstanceId, from_node: NodeId, to_node: NodeId },
}

impl MigrationAction {
    pub fn is_move(&self) -> bool {
        matches!(self, MigrationAction::Move { .. })
    }

    pub fn instance(&self) -> Option<InstanceId> {
        match *self {
            MigrationAction::NoOp => None,
            MigrationAction::Move { instance_id, .. } => Some(instance_id),
        }
    }

    /// Placement that results from applying the action (ignoring reconfiguration).
    pub fn apply(&self, placement: &Placement) -> Placement {
        match *self {
            MigrationAction::NoOp => placement.clone(),
            MigrationAction::Move { instance_id, to_node, .. } => placement.with_move(instance_id, to_node),
        }
    }

    pub fn describe(&self, cluster: &Cluster) -> String {
        match *self {
            MigrationAction::NoOp => "no migration".to_string(),
            MigrationAction::Move { instance_id, from_node, to_node } => format!(
                "move {} instance {} from node {} to node {}",
                cluster.instances[instance_id].category.label(),
                instance_id,
                from_node,
                to_node
            ),
        }
    }
}

impl fmt::Display for MigrationAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MigrationAction::NoOp => write!(f, "noop"),
            MigrationAction::Move { instance_id, from_node, to_node } => {
                write!(f, "s{instance_id}:n{from_node}->n{to_node}")
            }
        }
    }
}
