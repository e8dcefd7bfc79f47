//! Cluster topology, service instances, requests, and the latency/feasibility
//! bookkeeping they imply.
//!
//! All times are `f64` seconds, GPU work is in FLOPs (capacity in FLOPs/s),
//! CPU work is in core-seconds (capacity in cores), and memory is in GB.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;
pub type InstanceId = usize;
pub type RequestId = u64;
pub type CellId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid cluster: {0}")]
    InvalidCluster(String),
    #[error("invalid request {request_id}: {reason}")]
    InvalidRequest { request_id: RequestId, reason: String },
    #[error("placement inconsistency for request {request_id}: {reason}")]
    PlacementInconsistency { request_id: RequestId, reason: String },
}

/// The two compute resources a node offers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Gpu,
    Cpu,
}

/// Instance categories hosted on the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Du,
    CuUp,
    LargeAi,
    SmallAi,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Du, Category::CuUp, Category::LargeAi, Category::SmallAi];

    pub fn is_ran(self) -> bool {
        matches!(self, Category::Du | Category::CuUp)
    }

    pub fn is_ai(self) -> bool {
        !self.is_ran()
    }

    /// The resource on which the instance does most of its work and, for RAN
    /// functions, the resource its capacity floor applies to.
    pub fn dominant_resource(self) -> Resource {
        match self {
            Category::CuUp => Resource::Cpu,
            _ => Resource::Gpu,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Category::Du => 0,
            Category::CuUp => 1,
            Category::LargeAi => 2,
            Category::SmallAi => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::Du => "DU",
            Category::CuUp => "CU-UP",
            Category::LargeAi => "large-AI",
            Category::SmallAi => "small-AI",
        }
    }
}

/// Request classes. AI classes traverse an AI service; RAN classes traverse
/// only their cell's DU and CU-UP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RequestClass {
    LargeAi,
    SmallAi,
    RanUrllc,
    RanEmbb,
}

impl RequestClass {
    pub fn is_ai(self) -> bool {
        matches!(self, RequestClass::LargeAi | RequestClass::SmallAi)
    }

    pub fn is_ran(self) -> bool {
        !self.is_ai()
    }

    /// Class group used by fulfillment reporting and critic labels.
    pub fn group(self) -> ClassGroup {
        match self {
            RequestClass::LargeAi => ClassGroup::Large,
            RequestClass::SmallAi => ClassGroup::Small,
            _ => ClassGroup::Ran,
        }
    }
}

/// Large-AI, small-AI and RAN-only, in critic output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassGroup {
    Large,
    Small,
    Ran,
}

impl ClassGroup {
    pub const ALL: [ClassGroup; 3] = [ClassGroup::Large, ClassGroup::Small, ClassGroup::Ran];

    pub fn index(self) -> usize {
        match self {
            ClassGroup::Large => 0,
            ClassGroup::Small => 1,
            ClassGroup::Ran => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub node_id: NodeId,
    /// FLOPs/s.
    pub gpu_capacity: f64,
    /// Cores.
    pub cpu_capacity: f64,
    /// GB.
    pub vram_capacity: f64,
    #[serde(default)]
    pub name: String,
}

impl NodeSpec {
    pub fn capacity(&self, resource: Resource) -> f64 {
        match resource {
            Resource::Gpu => self.gpu_capacity,
            Resource::Cpu => self.cpu_capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub instance_id: InstanceId,
    pub category: Category,
    /// Persistent GPU memory footprint in GB.
    pub weight_footprint: f64,
    /// Unavailability window after a migration, seconds.
    pub reconfig_delay: f64,
    /// Serving cell, present iff the instance is a RAN function.
    #[serde(default)]
    pub cell_id: Option<CellId>,
}

/// Which instance kind a request stage runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Du,
    CuUp,
    Ai,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageWork {
    pub stage: StageKind,
    /// FLOPs.
    pub gpu_work: f64,
    /// Core-seconds.
    pub cpu_work: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub request_id: RequestId,
    pub class: RequestClass,
    /// Arrival time, seconds.
    pub arrival: f64,
    /// Deadline budget relative to arrival, seconds.
    pub deadline_budget: f64,
    pub cell_id: CellId,
    /// Invoked AI service (AI classes only).
    #[serde(default)]
    pub target_service: Option<InstanceId>,
    /// Stage work in traversal order.
    pub stages: Vec<StageWork>,
    /// Transient KV cache in GB, held while in service (AI classes only).
    #[serde(default)]
    pub kv_cache: f64,
}

impl Request {
    pub fn absolute_deadline(&self) -> f64 {
        self.arrival + self.deadline_budget
    }

    pub fn total_gpu_work(&self) -> f64 {
        self.stages.iter().map(|s| s.gpu_work).sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: &str| {
            Err(ModelError::InvalidRequest { request_id: self.request_id, reason: reason.to_string() })
        };
        if !(self.deadline_budget > 0.0) {
            return fail("deadline budget must be positive");
        }
        if !self.arrival.is_finite() || self.arrival < 0.0 {
            return fail("arrival must be a finite non-negative time");
        }
        if self.kv_cache < 0.0 || (self.class.is_ran() && self.kv_cache > 0.0) {
            return fail("KV cache must be zero for RAN-only requests and non-negative otherwise");
        }
        if self.stages.iter().any(|s| s.gpu_work < 0.0 || s.cpu_work < 0.0) {
            return fail("stage work must be non-negative");
        }
        let kinds: Vec<StageKind> = self.stages.iter().map(|s| s.stage).collect();
        if self.class.is_ran() {
            if kinds != [StageKind::Du, StageKind::CuUp] {
                return fail("RAN-only requests carry exactly a DU stage followed by a CU-UP stage");
            }
        } else {
            if kinds != [StageKind::Ai] {
                return fail("AI requests carry exactly one AI-service stage");
            }
            if self.target_service.is_none() {
                return fail("AI requests need a target service");
            }
        }
        Ok(())
    }
}

/// Static topology: nodes plus the instances they can host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub nodes: Vec<NodeSpec>,
    pub instances: Vec<InstanceSpec>,
}

impl Cluster {
    pub fn new(nodes: Vec<NodeSpec>, instances: Vec<InstanceSpec>) -> Result<Self, ModelError> {
        let cluster = Cluster { nodes, instances };
        cluster.validate()?;
        Ok(cluster)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidCluster(msg));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.node_id != i {
                return bad(format!("node ids must be dense and ordered; found {} at position {i}", n.node_id));
            }
            if !(n.gpu_capacity > 0.0 && n.cpu_capacity > 0.0 && n.vram_capacity > 0.0) {
                return bad(format!("node {i} must have strictly positive capacities"));
            }
        }
        let mut du_cells = Vec::new();
        let mut cu_cells = Vec::new();
        for (i, s) in self.instances.iter().enumerate() {
            if s.instance_id != i {
                return bad(format!("instance ids must be dense and ordered; found {} at position {i}", s.instance_id));
            }
            if !(s.reconfig_delay > 0.0) {
                return bad(format!("instance {i} needs a positive reconfiguration delay"));
            }
            if s.weight_footprint < 0.0 {
                return bad(format!("instance {i} has a negative weight footprint"));
            }
            match (s.category, s.cell_id) {
                (Category::CuUp, Some(c)) => {
                    if s.weight_footprint != 0.0 {
                        return bad(format!("CU-UP instance {i} must have zero weight footprint"));
                    }
                    cu_cells.push(c);
                }
                (Category::Du, Some(c)) => du_cells.push(c),
                (cat, None) if cat.is_ai() => {}
                (cat, _) => return bad(format!("instance {i} ({}) has an inconsistent cell id", cat.label())),
            }
        }
        du_cells.sort_unstable();
        cu_cells.sort_unstable();
        if du_cells.windows(2).any(|w| w[0] == w[1]) || cu_cells.windows(2).any(|w| w[0] == w[1]) {
            return bad("each cell needs exactly one DU and one CU-UP".into());
        }
        if du_cells != cu_cells {
            return bad("every cell must have both a DU and a CU-UP".into());
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn cells(&self) -> Vec<CellId> {
        let mut cells: Vec<CellId> = self
            .instances
            .iter()
            .filter(|s| s.category == Category::Du)
            .filter_map(|s| s.cell_id)
            .collect();
        cells.sort_unstable();
        cells
    }

    fn ran_instance(&self, cell: CellId, category: Category) -> Option<InstanceId> {
        self.instances
            .iter()
            .find(|s| s.category == category && s.cell_id == Some(cell))
            .map(|s| s.instance_id)
    }

    pub fn du_of_cell(&self, cell: CellId) -> Option<InstanceId> {
        self.ran_instance(cell, Category::Du)
    }

    pub fn cu_of_cell(&self, cell: CellId) -> Option<InstanceId> {
        self.ran_instance(cell, Category::CuUp)
    }

    pub fn instances_of(&self, category: Category) -> impl Iterator<Item = &InstanceSpec> {
        self.instances.iter().filter(move |s| s.category == category)
    }

    /// Instance serving a given stage of a request.
    pub fn stage_instance(&self, request: &Request, stage: usize) -> Result<InstanceId, ModelError> {
        let inconsistent = |reason: String| ModelError::PlacementInconsistency { request_id: request.request_id, reason };
        let work = request
            .stages
            .get(stage)
            .ok_or_else(|| inconsistent(format!("no stage {stage}")))?;
        match work.stage {
            StageKind::Du => self
                .du_of_cell(request.cell_id)
                .ok_or_else(|| inconsistent(format!("cell {} has no DU", request.cell_id))),
            StageKind::CuUp => self
                .cu_of_cell(request.cell_id)
                .ok_or_else(|| inconsistent(format!("cell {} has no CU-UP", request.cell_id))),
            StageKind::Ai => {
                let target = request
                    .target_service
                    .ok_or_else(|| inconsistent("AI request without target service".into()))?;
                if target >= self.instances.len() || !self.instances[target].category.is_ai() {
                    return Err(inconsistent(format!("target {target} is not an AI service")));
                }
                Ok(target)
            }
        }
    }

    /// Total GPU capacity, FLOPs/s.
    pub fn total_gpu_capacity(&self) -> f64 {
        self.nodes.iter().map(|n| n.gpu_capacity).sum()
    }
}

/// Residency of every instance plus any active reconfiguration windows.
///
/// Residency is stored as a host per instance, so "resident on exactly one
/// node" holds by construction; `resides` exposes the indicator view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    host: Vec<NodeId>,
    reconfig_until: Vec<Option<f64>>,
}

impl Placement {
    pub fn new(cluster: &Cluster, host: Vec<NodeId>) -> Result<Self, ModelError> {
        if host.len() != cluster.instances.len() {
            return Err(ModelError::InvalidCluster(format!(
                "placement lists {} hosts for {} instances",
                host.len(),
                cluster.instances.len()
            )));
        }
        if let Some((s, &n)) = host.iter().enumerate().find(|(_, &n)| n >= cluster.nodes.len()) {
            return Err(ModelError::InvalidCluster(format!("instance {s} placed on unknown node {n}")));
        }
        let placement = Placement { reconfig_until: vec![None; host.len()], host };
        for (n, ok) in check_memory_feasible(&placement, &vec![0.0; cluster.nodes.len()], cluster)
            .into_iter()
            .enumerate()
        {
            if !ok {
                return Err(ModelError::InvalidCluster(format!("resident weights exceed VRAM on node {n}")));
            }
        }
        Ok(placement)
    }

    pub fn host(&self, instance: InstanceId) -> NodeId {
        self.host[instance]
    }

    pub fn hosts(&self) -> &[NodeId] {
        &self.host
    }

    /// Residency indicator for `(node, instance)`.
    pub fn resides(&self, node: NodeId, instance: InstanceId) -> bool {
        self.host[instance] == node
    }

    pub fn residents(&self, node: NodeId) -> impl Iterator<Item = InstanceId> + '_ {
        self.host.iter().enumerate().filter(move |(_, &n)| n == node).map(|(s, _)| s)
    }

    pub fn reconfig_until(&self, instance: InstanceId) -> Option<f64> {
        self.reconfig_until[instance]
    }

    pub fn is_reconfiguring(&self, instance: InstanceId) -> bool {
        self.reconfig_until[instance].is_some()
    }

    pub fn resident_weights(&self, node: NodeId, cluster: &Cluster) -> f64 {
        self.residents(node).map(|s| cluster.instances[s].weight_footprint).sum()
    }

    /// Move `instance` to `node` and open its reconfiguration window.
    pub(crate) fn relocate(&mut self, instance: InstanceId, node: NodeId, until: f64) {
        self.host[instance] = node;
        self.reconfig_until[instance] = Some(until);
    }

    pub(crate) fn finish_reconfig(&mut self, instance: InstanceId) {
        self.reconfig_until[instance] = None;
    }

    /// Placement after moving `instance` to `node`, without any reconfiguration bookkeeping.
    pub fn with_move(&self, instance: InstanceId, node: NodeId) -> Placement {
        let mut next = self.clone();
        next.host[instance] = node;
        next
    }
}

/// Per-instance GPU/CPU allocations. An instance only ever receives
/// capacity on its host, so a per-instance vector is the whole (node, instance) map.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AllocationVector {
    pub gpu: Vec<f64>,
    pub cpu: Vec<f64>,
}

impl AllocationVector {
    pub fn zeros(instances: usize) -> Self {
        AllocationVector { gpu: vec![0.0; instances], cpu: vec![0.0; instances] }
    }

    pub fn node_totals(&self, node: NodeId, placement: &Placement) -> (f64, f64) {
        placement
            .residents(node)
            .fold((0.0, 0.0), |(g, c), s| (g + self.gpu[s], c + self.cpu[s]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub request_id: RequestId,
    pub class: RequestClass,
    pub arrival: f64,
    pub completion: f64,
    pub end_to_end_latency: f64,
    pub transport_delay: f64,
    pub met_deadline: bool,
}

impl CompletionRecord {
    pub fn new(request: &Request, completion: f64, transport_delay: f64) -> Self {
        let latency = completion - request.arrival;
        CompletionRecord {
            request_id: request.request_id,
            class: request.class,
            arrival: request.arrival,
            completion,
            end_to_end_latency: latency,
            transport_delay,
            met_deadline: latency <= request.deadline_budget,
        }
    }
}

/// Intra-cluster transport delay of a request under `placement`.
///
/// RAN-only requests hop DU -> CU-UP (one hop iff on distinct nodes). AI
/// requests enter at the serving cell's DU node and hop to the AI node (one
/// hop iff the AI instance is elsewhere), plus the RAN-stage packet delay.
pub fn compute_transport_delay(
    request: &Request,
    cluster: &Cluster,
    placement: &Placement,
    per_hop: f64,
    ran_packet_delay: f64,
) -> Result<f64, ModelError> {
    let inconsistent = |reason: &str| ModelError::PlacementInconsistency {
        request_id: request.request_id,
        reason: reason.to_string(),
    };
    let du = cluster.du_of_cell(request.cell_id).ok_or_else(|| inconsistent("serving cell has no DU"))?;
    if du >= placement.hosts().len() {
        return Err(inconsistent("DU missing from placement"));
    }
    let du_node = placement.host(du);
    if request.class.is_ran() {
        let cu = cluster.cu_of_cell(request.cell_id).ok_or_else(|| inconsistent("serving cell has no CU-UP"))?;
        if cu >= placement.hosts().len() {
            return Err(inconsistent("CU-UP missing from placement"));
        }
        let hops = usize::from(placement.host(cu) != du_node);
        Ok(per_hop * hops as f64)
    } else {
        let ai = cluster.stage_instance(request, 0)?;
        if ai >= placement.hosts().len() {
            return Err(inconsistent("AI service missing from placement"));
        }
        let hops = usize::from(placement.host(ai) != du_node);
        Ok(per_hop * hops as f64 + ran_packet_delay)
    }
}

/// Per-node memory feasibility: resident weights plus active KV within VRAM (inclusive).
pub fn check_memory_feasible(placement: &Placement, active_kv: &[f64], cluster: &Cluster) -> Vec<bool> {
    cluster
        .nodes
        .iter()
        .map(|n| {
            let kv = active_kv.get(n.node_id).copied().unwrap_or(0.0);
            placement.resident_weights(n.node_id, cluster) + kv <= n.vram_capacity
        })
        .collect()
}
