use serde::{Deserialize, Serialize};

use crate::model::{Category, InstanceId, NodeId, Resource};

/// Per-node view at an epoch boundary. Utilizations are averages over the
/// preceding epoch window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub node_id: NodeId,
    pub gpu_capacity: f64,
    pub cpu_capacity: f64,
    pub vram_capacity: f64,
    /// Allocated GPU capacity that was actually used, as a fraction of G_n.
    pub gpu_util: f64,
    pub cpu_util: f64,
    /// Time-averaged RAN floor reservation as a fraction of G_n.
    pub ran_floor_util: f64,
    /// Resident weights plus in-service KV, GB.
    pub vram_used: f64,
    pub vram_headroom: f64,
}

impl NodeState {
    pub fn capacity(&self, resource: Resource) -> f64 {
        match resource {
            Resource::Gpu => self.gpu_capacity,
            Resource::Cpu => self.cpu_capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceState {
    pub instance_id: InstanceId,
    pub category: Category,
    pub host: NodeId,
    pub weight_footprint: f64,
    pub reconfig_delay: f64,
    pub backlog_gpu_work: f64,
    pub backlog_cpu_work: f64,
    /// Backlog on the dominant resource divided by the host's full capacity.
    pub backlog_seconds: f64,
    pub active_requests: usize,
    pub reconfiguring: bool,
    /// Work offered over the last window per second: FLOPs/s and cores.
    pub offered_gpu_rate: f64,
    pub offered_cpu_rate: f64,
}

impl InstanceState {
    pub fn offered_rate(&self, resource: Resource) -> f64 {
        match resource {
            Resource::Gpu => self.offered_gpu_rate,
            Resource::Cpu => self.offered_cpu_rate,
        }
    }

    pub fn backlog_work(&self, resource: Resource) -> f64 {
        match resource {
            Resource::Gpu => self.backlog_gpu_work,
            Resource::Cpu => self.backlog_cpu_work,
        }
    }

    /// Sustained demand on `resource`: offered rate plus the backlog cleared over one epoch.
    pub fn demand(&self, resource: Resource, epoch_interval: f64) -> f64 {
        self.offered_rate(resource) + self.backlog_work(resource) / epoch_interval
    }
}

/// Simulator state handed to placement policies at `t_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSnapshot {
    pub epoch: usize,
    pub timestamp: f64,
    pub epoch_interval: f64,
    pub nodes: Vec<NodeState>,
    pub instances: Vec<InstanceState>,
    /// Fulfillment of requests completed during the last window: large, small, RAN.
    pub recent_fulfillment: [f64; 3],
}

impl EpochSnapshot {
    /// Demand-to-capacity pressure of every node on `resource`.
    pub fn pressure(&self, resource: Resource) -> Vec<f64> {
        let mut p = vec![0.0; self.nodes.len()];
        for s in &self.instances {
            p[s.host] += s.demand(resource, self.epoch_interval);
        }
        for (n, v) in p.iter_mut().enumerate() {
            *v /= self.nodes[n].capacity(resource);
        }
        p
    }

    /// VRAM headroom at `node` if an instance of footprint `weight` were added.
    pub fn headroom_after(&self, node: NodeId, weight: f64) -> f64 {
        self.nodes[node].vram_headroom - weight
    }
}
