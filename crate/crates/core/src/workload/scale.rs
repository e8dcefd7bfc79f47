use serde::{Deserialize, Serialize};

use crate::model::{Cluster, Request};

use super::{merge_streams, WorkloadError};

/// Accepted relative gap between realized and requested load.
pub const RHO_TOLERANCE: f64 = 0.02;

/// Which GPU capacity the offered AI load is normalized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RhoScope {
    /// Every node's GPU capacity.
    Cluster,
    /// Nodes whose VRAM can hold the largest AI model on its own.
    #[default]
    AiPool,
}

/// GPU capacity available to AI services under `scope`, net of the average
/// RAN floor reservation per node.
pub fn ai_pool_capacity(cluster: &Cluster, floors: &[f64], scope: RhoScope) -> f64 {
    let largest = cluster
        .instances
        .iter()
        .filter(|s| s.category.is_ai())
        .map(|s| s.weight_footprint)
        .fold(0.0, f64::max);
    cluster
        .nodes
        .iter()
        .filter(|n| scope == RhoScope::Cluster || n.vram_capacity >= largest)
        .map(|n| (n.gpu_capacity - floors.get(n.node_id).copied().unwrap_or(0.0)).max(0.0))
        .sum()
}

/// Offered AI GPU work per second over `capacity`.
pub fn measured_rho(requests: &[Request], capacity: f64, horizon: f64) -> f64 {
    let work: f64 = requests.iter().filter(|r| r.class.is_ai() && r.arrival < horizon).map(Request::total_gpu_work).sum();
    work / horizon / capacity
}

/// Keeps `floor((i+1)f + 1/2) - floor(i f + 1/2)` copies of the i-th
/// arrival; copies are spread over the gap to the next arrival.
fn systematic(stream: &[Request], factor: f64, horizon: f64) -> Vec<Request> {
    let mut out = Vec::with_capacity((stream.len() as f64 * factor).ceil() as usize + 1);
    for (i, r) in stream.iter().enumerate() {
        let copies = ((i + 1) as f64 * factor + 0.5).floor() - (i as f64 * factor + 0.5).floor();
        let copies = copies.max(0.0) as usize;
        let next = stream.get(i + 1).map_or(horizon, |n| n.arrival).max(r.arrival);
        for j in 0..copies {
            let mut c = r.clone();
            c.arrival = r.arrival + (next - r.arrival) * j as f64 / copies as f64;
            if c.arrival >= horizon {
                c.arrival = r.arrival;
            }
            out.push(c);
        }
    }
    out
}

/// Thins or replicates every stream by a common factor until the offered AI
/// load is within [`RHO_TOLERANCE`] of `target`.
pub fn scale_to_rho(
    requests: &[Request],
    capacity: f64,
    horizon: f64,
    target: f64,
) -> Result<Vec<Request>, WorkloadError> {
    let unreachable = |reason: &str| WorkloadError::Unreachable { target, reason: reason.to_string() };
    if !(target > 0.0) || !target.is_finite() {
        return Err(unreachable("target must be positive"));
    }
    if !(capacity > 0.0) || !(horizon > 0.0) {
        return Err(unreachable("no AI capacity or empty horizon"));
    }
    let base = measured_rho(requests, capacity, horizon);
    if !(base > 0.0) {
        return Err(unreachable("workload has no AI demand within the horizon"));
    }
    let mut streams: Vec<Vec<Request>> = vec![Vec::new(), Vec::new()];
    for r in requests.iter().filter(|r| r.arrival < horizon) {
        streams[usize::from(r.class.is_ran())].push(r.clone());
    }
    for s in &mut streams {
        s.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
    }
    let mut factor = target / base;
    let mut best: Option<(f64, Vec<Request>)> = None;
    for _ in 0..40 {
        let scaled: Vec<Vec<Request>> = streams.iter().map(|s| systematic(s, factor, horizon)).collect();
        let rho = measured_rho(&scaled[0], capacity, horizon);
        let gap = (rho / target - 1.0).abs();
        if best.as_ref().map_or(true, |(g, _)| gap < *g) {
            best = Some((gap, merge_streams(scaled)));
        }
        if gap <= RHO_TOLERANCE / 4.0 || !(rho > 0.0) {
            break;
        }
        factor *= target / rho;
    }
    match best {
        Some((gap, out)) if gap <= RHO_TOLERANCE => Ok(out),
        Some((gap, _)) => Err(unreachable(&format!("closest realized load is off by {:.1}%", gap * 100.0))),
        None => Err(unreachable("no scaled workload")),
    }
}
