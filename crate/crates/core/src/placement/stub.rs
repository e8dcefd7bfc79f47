use serde::{Deserialize, Serialize};

use super::{EpochSnapshot, MigrationAction};

/// Knobs of the deterministic shortlist policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StubConfig {
    pub k: usize,
    /// Weight of the reconfiguration penalty `R_s / Delta`.
    pub reconfig_weight: f64,
    /// Weight of the RAN-floor pressure added at the destination.
    pub floor_weight: f64,
}

impl Default for StubConfig {
    fn default() -> Self {
        StubConfig { k: 3, reconfig_weight: 0.1, floor_weight: 1.0 }
    }
}

/// Score of one candidate; zero for NoOp.
///
/// Gain is the drop in the larger of source and destination pressure on the
/// instance's dominant resource, where pressure is demand over capacity.
pub fn stub_score(snapshot: &EpochSnapshot, action: &MigrationAction, cfg: &StubConfig) -> f64 {
    let MigrationAction::Move { instance_id, from_node, to_node } = *action else {
        return 0.0;
    };
    let inst = &snapshot.instances[instance_id];
    let resource = inst.category.dominant_resource();
    let pressure = snapshot.pressure(resource);
    let demand = inst.demand(resource, snapshot.epoch_interval);
    let cap_src = snapshot.nodes[from_node].capacity(resource);
    let cap_dst = snapshot.nodes[to_node].capacity(resource);
    let (p_src, p_dst) = (pressure[from_node], pressure[to_node]);
    let gain = p_src.max(p_dst) - (p_src - demand / cap_src).max(p_dst + demand / cap_dst);
    let reconfig = cfg.reconfig_weight * inst.reconfig_delay / snapshot.epoch_interval;
    let floor = if inst.category.is_ran() { cfg.floor_weight * demand / cap_dst } else { 0.0 };
    gain - reconfig - floor
}

/// Top-K positive-score candidates, best first, with NoOp appended when fewer
/// than K scored positive. Ties go to the lower instance id, then lower destination.
pub fn stub_shortlist(snapshot: &EpochSnapshot, candidates: &[MigrationAction], cfg: &StubConfig) -> Vec<MigrationAction> {
    let k = cfg.k.max(1);
    let mut scored: Vec<(f64, MigrationAction)> = candidates
        .iter()
        .filter(|a| a.is_move())
        .map(|a| (stub_score(snapshot, a, cfg), *a))
        .filter(|(s, _)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| tie_key(&a.1).cmp(&tie_key(&b.1))));
    let mut out: Vec<MigrationAction> = scored.into_iter().take(k).map(|(_, a)| a).collect();
    if out.len() < k {
        out.push(MigrationAction::NoOp);
    }
    out
}

fn tie_key(a: &MigrationAction) -> (usize, usize) {
    match *a {
        MigrationAction::NoOp => (usize::MAX, usize::MAX),
        MigrationAction::Move { instance_id, to_node, .. } => (instance_id, to_node),
    }
}
