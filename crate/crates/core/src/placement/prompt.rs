use std::fmt::Write;

use crate::model::Cluster;

use super::{EpochSnapshot, MigrationAction};

/// Tag of the fenced block the agent must answer in.
pub const SHORTLIST_FENCE: &str = "shortlist";

const POLICY: &str = "You are the placement controller of an edge cluster shared by radio access network \
functions (DU, CU-UP) and AI inference services. Priorities, in order:\n\
1. Protect the deadlines of RAN-only requests.\n\
2. Improve end-to-end deadline fulfillment of AI service requests.\n\
3. Account for the reconfiguration delay R_s: a migrated instance serves nothing until it has reloaded.\n\
At most one migration is committed per epoch; the no-migration option is always allowed.";

/// Deterministic prompt: policy, state snapshot, candidate list, answer format.
pub fn build_prompt(cluster: &Cluster, snapshot: &EpochSnapshot, candidates: &[MigrationAction], k: usize) -> String {
    let mut p = String::new();
    p.push_str("## Policy\n");
    p.push_str(POLICY);
    p.push_str("\n\n## State\n");
    let _ = writeln!(p, "epoch {} at t={:.3}s, epoch interval {:.3}s", snapshot.epoch, snapshot.timestamp, snapshot.epoch_interval);
    let _ = writeln!(
        p,
        "recent fulfillment: large-AI {:.3}, small-AI {:.3}, RAN {:.3}",
        snapshot.recent_fulfillment[0], snapshot.recent_fulfillment[1], snapshot.recent_fulfillment[2]
    );
    p.push_str("nodes (id, GPU TFLOP/s, CPU cores, GPU util, CPU util, RAN-floor util, VRAM headroom GB):\n");
    for n in &snapshot.nodes {
        let _ = writeln!(
            p,
            "  n{} {:.1} {:.0} {:.3} {:.3} {:.3} {:.2}",
            n.node_id,
            n.gpu_capacity / 1e12,
            n.cpu_capacity,
            n.gpu_util,
            n.cpu_util,
            n.ran_floor_util,
            n.vram_headroom
        );
    }
    p.push_str("instances (id, category, host, weights GB, R_s s, backlog s, active requests, reconfiguring):\n");
    for s in &snapshot.instances {
        let _ = writeln!(
            p,
            "  s{} {} n{} {:.2} {:.2} {:.4} {} {}",
            s.instance_id,
            s.category.label(),
            s.host,
            s.weight_footprint,
            s.reconfig_delay,
            s.backlog_seconds,
            s.active_requests,
            if s.reconfiguring { "yes" } else { "no" }
        );
    }
    p.push_str("\n## Candidates\n");
    for (id, a) in candidates.iter().enumerate() {
        let extra = match *a {
            MigrationAction::Move { instance_id, to_node, .. } => format!(
                " (destination VRAM headroom after move {:.2} GB)",
                snapshot.headroom_after(to_node, cluster.instances[instance_id].weight_footprint)
            ),
            MigrationAction::NoOp => String::new(),
        };
        let _ = writeln!(p, "  [{id}] {}{extra}", a.describe(cluster));
    }
    p.push_str("\n## Answer\n");
    let _ = writeln!(
        p,
        "Reply with an ordered list of at most {k} candidate ids, best first, as a JSON array inside a fenced block:\n```{SHORTLIST_FENCE}\n[id, ...]\n```"
    );
    p
}

/// Extracts candidate ids from the agent's reply. Ids outside the candidate
/// range are dropped, duplicates removed, the list truncated to `k`.
pub fn parse_shortlist(reply: &str, candidate_count: usize, k: usize) -> Option<Vec<usize>> {
    let ids = fenced_ids(reply)?;
    let mut out = Vec::new();
    for id in ids {
        if id < candidate_count && !out.contains(&id) {
            out.push(id);
        }
        if out.len() == k {
            break;
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

fn fenced_ids(reply: &str) -> Option<Vec<usize>> {
    let tagged = format!("```{SHORTLIST_FENCE}");
    let start = reply.find(&tagged).map(|i| i + tagged.len()).or_else(|| reply.find("```").map(|i| i + 3))?;
    let body = &reply[start..];
    let body = &body[body.find('\n').map_or(0, |i| i + 1)..];
    let end = body.find("```")?;
    let values: Vec<serde_json::Value> = serde_json::from_str(body[..end].trim()).ok()?;
    Some(values.iter().filter_map(|v| v.as_u64()).map(|v| v as usize).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fenced_list() {
        assert_eq!(parse_shortlist("ok\n```shortlist\n[5, 2, 0]\n```", 10, 3), Some(vec![5, 2, 0]));
    }

    #[test]
    fn drops_unknown_and_duplicate_ids() {
        assert_eq!(parse_shortlist("```shortlist\n[99, 2, 2, 1, 0]\n```", 10, 3), Some(vec![2, 1, 0]));
    }

    #[test]
    fn untagged_fence_is_accepted() {
        assert_eq!(parse_shortlist("```json\n[1]\n```", 2, 3), Some(vec![1]));
    }

    #[test]
    fn garbage_is_rejected() {
        assert_eq!(parse_shortlist("I would move the large model.", 10, 3), None);
        assert_eq!(parse_shortlist("```shortlist\nnot json\n```", 10, 3), None);
        assert_eq!(parse_shortlist("```shortlist\n[42]\n```", 10, 3), None);
    }
}
