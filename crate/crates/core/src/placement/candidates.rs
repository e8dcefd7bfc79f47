use crate::model::{Category, Cluster, Placement};

use super::MigrationAction;

/// NoOp followed by every single-instance move whose destination can hold the
/// instance's weights next to the weights already resident there.
///
/// Reconfiguring instances and categories outside `movable` contribute no moves.
pub fn generate_candidates(cluster: &Cluster, placement: &Placement, movable: &[Category]) -> Vec<MigrationAction> {
    let mut out = vec![MigrationAction::NoOp];
    for spec in &cluster.instances {
        let s = spec.instance_id;
        if !movable.contains(&spec.category) || placement.is_reconfiguring(s) {
            continue;
        }
        let from = placement.host(s);
        for node in &cluster.nodes {
            let to = node.node_id;
            if to == from {
                continue;
            }
            if placement.resident_weights(to, cluster) + spec.weight_footprint <= node.vram_capacity {
                out.push(MigrationAction::Move { instance_id: s, from_node: from, to_node: to });
            }
        }
    }
    out
}

/// Upper bound on the candidate count for a movable set of size `movable` on `nodes` nodes.
pub fn candidate_bound(movable: usize, nodes: usize) -> usize {
    movable * nodes.saturating_sub(1) + 1
}

/// Number of instances whose category is movable.
pub fn movable_count(cluster: &Cluster, movable: &[Category]) -> usize {
    cluster.instances.iter().filter(|s| movable.contains(&s.category)).count()
}
