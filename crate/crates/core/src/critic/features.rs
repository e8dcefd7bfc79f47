use crate::model::{Category, Resource};
use crate::placement::{EpochSnapshot, MigrationAction};

/// Length of the action block at the end of every feature vector.
pub const ACTION_FEATURES: usize = 11;

/// Feature vector length for a cluster of `nodes` nodes:
/// four per node, four backlog totals, three recent fulfillments, the action block.
pub fn feature_len(nodes: usize) -> usize {
    4 * nodes + Category::ALL.len() + 3 + ACTION_FEATURES
}

/// Encodes `(snapshot, action)` for the critic. Raw, unstandardized values.
///
/// Per node: GPU utilization, GPU demand pressure, RAN-floor utilization and
/// VRAM headroom fraction. Then backlog seconds per category and recent
/// fulfillment. The action block is `[is_move, category one-hot (4),
/// source pressure before/after, destination pressure before/after,
/// destination VRAM headroom fraction after, R_s / Delta]` and all zeros for NoOp.
pub fn encode_features(snapshot: &EpochSnapshot, action: &MigrationAction) -> Vec<f64> {
    let mut x = Vec::with_capacity(feature_len(snapshot.nodes.len()));
    let gpu_pressure = snapshot.pressure(Resource::Gpu);
    for (n, node) in snapshot.nodes.iter().enumerate() {
        x.push(node.gpu_util);
        x.push(gpu_pressure[n]);
        x.push(node.ran_floor_util);
        x.push(node.vram_headroom / node.vram_capacity);
    }
    let mut backlog = [0.0; 4];
    for s in &snapshot.instances {
        backlog[s.category.index()] += s.backlog_seconds;
    }
    x.extend_from_slice(&backlog);
    x.extend_from_slice(&snapshot.recent_fulfillment);
    match *action {
        MigrationAction::NoOp => x.extend_from_slice(&[0.0; ACTION_FEATURES]),
        MigrationAction::Move { instance_id, from_node, to_node } => {
            let inst = &snapshot.instances[instance_id];
            let r = inst.category.dominant_resource();
            let p = snapshot.pressure(r);
            let d = inst.demand(r, snapshot.epoch_interval);
            let src_cap = snapshot.nodes[from_node].capacity(r);
            let dst_cap = snapshot.nodes[to_node].capacity(r);
            x.push(1.0);
            let mut onehot = [0.0; 4];
            onehot[inst.category.index()] = 1.0;
            x.extend_from_slice(&onehot);
            x.push(p[from_node]);
            x.push(p[from_node] - d / src_cap);
            x.push(p[to_node]);
            x.push(p[to_node] + d / dst_cap);
            x.push(snapshot.headroom_after(to_node, inst.weight_footprint) / snapshot.nodes[to_node].vram_capacity);
            x.push(inst.reconfig_delay / snapshot.epoch_interval);
        }
    }
    debug_assert_eq!(x.len(), feature_len(snapshot.nodes.len()));
    x
}
