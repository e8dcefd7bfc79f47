use std::collections::VecDeque;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::allocator::{
    aggregate_load, allocate_node, compute_ran_floor, ActiveWork, AllocError, AllocRule, DownstreamEstimator,
    InstanceLoad, DEFAULT_EPSILON,
};
use crate::model::{
    compute_transport_delay, AllocationVector, Category, ClassGroup, Cluster, CompletionRecord, InstanceId,
    ModelError, NodeId, Placement, Request, RequestClass, RequestId, Resource, StageKind,
};
use crate::placement::{
    candidate_bound, generate_candidates, movable_count, EpochSnapshot, InstanceState, MigrationAction, NodeState,
};

use super::event::{Event, EventKind, EventQueue};
use super::trace::TraceRecord;

/// Engine knobs. Times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Arrivals and epochs stop at the horizon; service then drains until
    /// every outstanding deadline has passed.
    pub horizon: f64,
    pub per_hop: f64,
    pub ran_packet_delay: f64,
    pub epsilon: f64,
    pub epoch_interval: f64,
    pub alloc_rule: AllocRule,
    /// Reserve RAN floors. Switching this off is only meant for experiments.
    pub ran_floors: bool,
    /// Keep serving after the horizon until all deadlines have passed.
    pub drain: bool,
    pub trace: bool,
    pub check_invariants: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 60.0,
            per_hop: 200e-6,
            ran_packet_delay: 100e-6,
            epsilon: DEFAULT_EPSILON,
            epoch_interval: 5.0,
            alloc_rule: AllocRule::Haf,
            ran_floors: true,
            drain: true,
            trace: false,
            check_invariants: true,
        }
    }
}

/// What a placement policy sees at an epoch boundary.
pub struct EpochContext<'a> {
    pub cluster: &'a Cluster,
    pub placement: &'a Placement,
    pub snapshot: &'a EpochSnapshot,
    pub candidates: &'a [MigrationAction],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochDecision {
    pub action: Option<MigrationAction>,
    /// Ordered shortlist the action was chosen from, if the policy builds one.
    pub shortlist: Vec<MigrationAction>,
    pub note: Option<String>,
}

impl EpochDecision {
    pub fn commit(action: MigrationAction) -> Self {
        EpochDecision { action: Some(action), ..Default::default() }
    }
}

/// Slow-timescale controller invoked at every epoch boundary.
pub trait EpochPolicy {
    /// Categories this policy may migrate.
    fn movable(&self) -> Vec<Category>;
    fn decide(&mut self, ctx: &EpochContext<'_>) -> EpochDecision;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub timestamp: f64,
    pub snapshot: EpochSnapshot,
    pub candidates: Vec<MigrationAction>,
    pub movable_instances: usize,
    pub shortlist: Vec<MigrationAction>,
    pub committed: MigrationAction,
    pub rejection: Option<String>,
    pub note: Option<String>,
}

impl EpochRecord {
    pub fn candidate_bound(&self) -> usize {
        candidate_bound(self.movable_instances, self.snapshot.nodes.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub epoch: usize,
    pub timestamp: f64,
    pub instance_id: InstanceId,
    pub category: Category,
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub available_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfinishedRequest {
    pub request_id: RequestId,
    pub class: RequestClass,
    pub arrival: f64,
    /// Stage reached, or `None` if still in transit to its first stage.
    pub stage: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SimOutcome {
    pub completions: Vec<CompletionRecord>,
    /// Residual backlog: requests with no completion when the run stopped.
    pub unfinished: Vec<UnfinishedRequest>,
    /// Deadline met, per input request in input order.
    pub request_met: Vec<bool>,
    pub epochs: Vec<EpochRecord>,
    pub migrations: Vec<MigrationRecord>,
    pub rejected_actions: usize,
    /// Distinct RAN requests whose floor denominator went non-positive.
    pub infeasible_floor_requests: usize,
    /// Allocation steps where RAN floors exceeded a node's capacity.
    pub floor_overflow_events: usize,
    pub events_processed: usize,
    /// Integral of the GPU floor reservation per node, FLOP.
    pub gpu_floor_integral: Vec<f64>,
    pub end_time: f64,
    pub violations: Vec<String>,
    /// Largest relative work-conservation error over completed stages.
    pub max_conservation_error: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

/// Picks the node with the smallest backlog, ties to the lowest id.
pub fn route_to_least_backlog(candidates: &[(NodeId, f64)]) -> Option<NodeId> {
    candidates
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(n, _)| n)
}

#[derive(Debug, Clone, Default)]
struct ReqState {
    stage: Option<usize>,
    resid_gpu: f64,
    resid_cpu: f64,
    served_gpu: f64,
    served_cpu: f64,
    admitted: bool,
    kv_node: Option<NodeId>,
    transport: f64,
    stage_enter: f64,
    done: bool,
    flagged_infeasible: bool,
}

#[derive(Debug, Clone, Default)]
struct Window {
    start: f64,
    served_gpu: Vec<f64>,
    served_cpu: Vec<f64>,
    floor_gpu: Vec<f64>,
    offered_gpu: Vec<f64>,
    offered_cpu: Vec<f64>,
    met: [usize; 3],
    total: [usize; 3],
}

impl Window {
    fn new(start: f64, nodes: usize, instances: usize) -> Self {
        Window {
            start,
            served_gpu: vec![0.0; nodes],
            served_cpu: vec![0.0; nodes],
            floor_gpu: vec![0.0; nodes],
            offered_gpu: vec![0.0; instances],
            offered_cpu: vec![0.0; instances],
            met: [0; 3],
            total: [0; 3],
        }
    }
}

/// Single-threaded discrete-event simulation of one scenario.
pub struct Simulation<'a> {
    cluster: &'a Cluster,
    requests: &'a [Request],
    cfg: SimConfig,
    placement: Placement,
    now: f64,
    events: EventQueue,
    rs: Vec<ReqState>,
    queues: Vec<VecDeque<usize>>,
    alloc: AllocationVector,
    floor_gpu: Vec<f64>,
    kv: Vec<f64>,
    weights: Vec<f64>,
    estimators: Vec<DownstreamEstimator>,
    window: Window,
    stop_after: f64,
    out: SimOutcome,
}

impl<'a> Simulation<'a> {
    pub fn new(
        cluster: &'a Cluster,
        placement: Placement,
        requests: &'a [Request],
        cfg: SimConfig,
    ) -> Result<Self, ModelError> {
        cluster.validate()?;
        for r in requests {
            r.validate()?;
            for stage in 0..r.stages.len() {
                cluster.stage_instance(r, stage)?;
            }
        }
        let n = cluster.num_nodes();
        let m = cluster.instances.len();
        let weights = (0..n).map(|node| placement.resident_weights(node, cluster)).collect();
        let estimators = cluster
            .instances
            .iter()
            .map(|s| {
                if s.category != Category::CuUp {
                    return DownstreamEstimator::new(0.0);
                }
                let (sum, count) = requests
                    .iter()
                    .filter(|r| r.class.is_ran() && Some(r.cell_id) == s.cell_id)
                    .flat_map(|r| r.stages.iter().filter(|w| w.stage == StageKind::CuUp))
                    .fold((0.0, 0usize), |(a, c), w| (a + w.cpu_work, c + 1));
                let mean = if count > 0 { sum / count as f64 } else { 0.0 };
                DownstreamEstimator::new(mean / cluster.nodes[placement.host(s.instance_id)].cpu_capacity)
            })
            .collect();
        let last_deadline = requests.iter().map(|r| r.absolute_deadline()).fold(0.0, f64::max);
        let stop_after = if cfg.drain { cfg.horizon.max(last_deadline) } else { cfg.horizon };
        let mut events = EventQueue::new();
        for (i, r) in requests.iter().enumerate() {
            events.push(Event { timestamp: r.arrival, kind: EventKind::Arrival, payload: i as u64, stage: None });
        }
        if cfg.epoch_interval > 0.0 {
            let first = cfg.epoch_interval;
            if first < cfg.horizon {
                events.push(Event { timestamp: first, kind: EventKind::EpochBoundary, payload: 1, stage: None });
            }
        }
        Ok(Simulation {
            cluster,
            requests,
            placement,
            now: 0.0,
            events,
            rs: vec![ReqState::default(); requests.len()],
            queues: vec![VecDeque::new(); m],
            alloc: AllocationVector::zeros(m),
            floor_gpu: vec![0.0; m],
            kv: vec![0.0; n],
            weights,
            estimators,
            window: Window::new(0.0, n, m),
            stop_after,
            out: SimOutcome {
                request_met: vec![false; requests.len()],
                gpu_floor_integral: vec![0.0; n],
                ..Default::default()
            },
            cfg,
        })
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    /// Runs to completion. Without a policy no epochs are taken.
    pub fn run(mut self, mut policy: Option<&mut (dyn EpochPolicy + '_)>) -> SimOutcome {
        if policy.is_none() {
            self.drop_epochs();
        }
        loop {
            let service = self.next_service();
            let heap_next = self.events.peek().map(|e| e.timestamp);
            let take_heap = match (heap_next, service) {
                (None, None) => break,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some(h), Some((t, _))) => h <= t,
            };
            let t = if take_heap { heap_next.unwrap() } else { service.unwrap().0 };
            if t > self.stop_after {
                break;
            }
            self.advance(t);
            let (kind, payload) = if take_heap {
                let ev = self.events.pop().expect("peeked");
                self.handle(ev, policy.as_deref_mut());
                (ev.kind, ev.payload)
            } else {
                let (_, s) = service.unwrap();
                self.complete_heads(s);
                (EventKind::StageCompletion, s as u64)
            };
            self.out.events_processed += 1;
            self.admit_heads();
            self.reallocate();
            if self.cfg.check_invariants {
                self.check_invariants();
            }
            if self.cfg.trace {
                self.record_trace(kind, payload);
            }
        }
        self.finish()
    }

    fn drop_epochs(&mut self) {
        let mut kept = EventQueue::new();
        while let Some(e) = self.events.pop() {
            if e.kind != EventKind::EpochBoundary {
                kept.push(e);
            }
        }
        self.events = kept;
    }

    fn stage_work(&self, ri: usize, stage: usize) -> (f64, f64) {
        let w = &self.requests[ri].stages[stage];
        (w.gpu_work, w.cpu_work)
    }

    fn instance_of(&self, ri: usize, stage: usize) -> InstanceId {
        self.cluster.stage_instance(&self.requests[ri], stage).expect("validated at construction")
    }

    fn frozen(&self, s: InstanceId) -> bool {
        self.placement.is_reconfiguring(s)
    }

    /// Earliest end of a head-of-line service phase, with its instance.
    fn next_service(&self) -> Option<(f64, InstanceId)> {
        let mut best: Option<(f64, InstanceId)> = None;
        for (s, q) in self.queues.iter().enumerate() {
            let Some(&ri) = q.front() else { continue };
            let st = &self.rs[ri];
            if !st.admitted || self.frozen(s) {
                continue;
            }
            let t = if st.resid_gpu > 0.0 {
                let g = self.alloc.gpu[s];
                if g <= 0.0 {
                    continue;
                }
                self.now + st.resid_gpu / g
            } else if st.resid_cpu > 0.0 {
                let c = self.alloc.cpu[s];
                if c <= 0.0 {
                    continue;
                }
                self.now + st.resid_cpu / c
            } else {
                self.now
            };
            if best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, s));
            }
        }
        best
    }

    /// Fluid progress of every head-of-line request over `[now, to]`.
    fn advance(&mut self, to: f64) {
        let dt = to - self.now;
        if dt > 0.0 {
            for s in 0..self.queues.len() {
                let host = self.placement.host(s);
                if self.frozen(s) {
                    continue;
                }
                if let Some(&ri) = self.queues[s].front() {
                    let st = &mut self.rs[ri];
                    if st.admitted {
                        if st.resid_gpu > 0.0 {
                            let done = (self.alloc.gpu[s] * dt).min(st.resid_gpu);
                            st.resid_gpu -= done;
                            st.served_gpu += self.alloc.gpu[s] * dt;
                            self.window.served_gpu[host] += done;
                        } else if st.resid_cpu > 0.0 {
                            let done = (self.alloc.cpu[s] * dt).min(st.resid_cpu);
                            st.resid_cpu -= done;
                            st.served_cpu += self.alloc.cpu[s] * dt;
                            self.window.served_cpu[host] += done;
                        }
                    }
                }
            }
            for (s, &f) in self.floor_gpu.iter().enumerate() {
                if f > 0.0 {
                    let host = self.placement.host(s);
                    self.window.floor_gpu[host] += f * dt;
                    self.out.gpu_floor_integral[host] += f * dt;
                }
            }
        }
        self.now = to;
    }

    fn handle(&mut self, ev: Event, policy: Option<&mut (dyn EpochPolicy + '_)>) {
        match ev.kind {
            EventKind::Arrival => self.on_arrival(ev.payload as usize, ev.stage),
            EventKind::ReconfigEnd => {
                let s = ev.payload as usize;
                self.placement.finish_reconfig(s);
                debug!("t={:.6} instance {s} available on node {}", self.now, self.placement.host(s));
            }
            EventKind::EpochBoundary => {
                if let Some(p) = policy {
                    self.on_epoch(ev.payload as usize, p);
                }
                let next = self.now + self.cfg.epoch_interval;
                if next < self.cfg.horizon {
                    self.events.push(Event {
                        timestamp: next,
                        kind: EventKind::EpochBoundary,
                        payload: ev.payload + 1,
                        stage: None,
                    });
                }
            }
            EventKind::StageCompletion => unreachable!("completions are computed, not queued"),
        }
    }

    fn on_arrival(&mut self, ri: usize, stage: Option<usize>) {
        let req = &self.requests[ri];
        match stage {
            Some(stage) => self.enqueue(ri, stage),
            None if req.class.is_ran() => self.enqueue(ri, 0),
            None => {
                let delay = compute_transport_delay(
                    req,
                    self.cluster,
                    &self.placement,
                    self.cfg.per_hop,
                    self.cfg.ran_packet_delay,
                )
                .expect("validated at construction");
                self.rs[ri].transport = delay;
                self.events.push(Event {
                    timestamp: self.now + delay,
                    kind: EventKind::Arrival,
                    payload: ri as u64,
                    stage: Some(0),
                });
            }
        }
    }

    fn enqueue(&mut self, ri: usize, stage: usize) {
        let s = self.instance_of(ri, stage);
        let (g, c) = self.stage_work(ri, stage);
        let st = &mut self.rs[ri];
        st.stage = Some(stage);
        st.resid_gpu = g;
        st.resid_cpu = c;
        st.served_gpu = 0.0;
        st.served_cpu = 0.0;
        st.admitted = false;
        st.stage_enter = self.now;
        self.window.offered_gpu[s] += g;
        self.window.offered_cpu[s] += c;
        self.queues[s].push_back(ri);
    }

    /// Completes every head whose phases have run out, forcing `forced`'s current phase to end.
    fn complete_heads(&mut self, forced: InstanceId) {
        for s in 0..self.queues.len() {
            let Some(&ri) = self.queues[s].front() else { continue };
            if !self.rs[ri].admitted || self.frozen(s) {
                continue;
            }
            let stage = self.rs[ri].stage.expect("queued requests have a stage");
            let (g, c) = self.stage_work(ri, stage);
            let st = &mut self.rs[ri];
            if s == forced {
                if st.resid_gpu > 0.0 {
                    st.resid_gpu = 0.0;
                } else {
                    st.resid_cpu = 0.0;
                }
            }
            if st.resid_gpu <= 1e-12 * g {
                st.resid_gpu = 0.0;
            }
            if st.resid_cpu <= 1e-12 * c {
                st.resid_cpu = 0.0;
            }
            if st.resid_gpu == 0.0 && st.resid_cpu == 0.0 {
                self.finish_stage(s, ri, stage);
            }
        }
    }

    fn finish_stage(&mut self, s: InstanceId, ri: usize, stage: usize) {
        let (g, c) = self.stage_work(ri, stage);
        // Timestamps are absolute f64 seconds, so each segment length carries
        // up to an ulp of rounding; allow for it on top of the relative bound.
        let quantum = 4.0 * f64::EPSILON * self.now.max(1.0);
        for (served, declared, rate) in [
            (self.rs[ri].served_gpu, g, self.alloc.gpu[s]),
            (self.rs[ri].served_cpu, c, self.alloc.cpu[s]),
        ] {
            if declared > 0.0 {
                let err = (served - declared).abs();
                self.out.max_conservation_error = self.out.max_conservation_error.max(err / declared);
                if err > 1e-9 * declared + rate * quantum {
                    self.out
                        .violations
                        .push(format!("work conservation: request {ri} stage {stage} served {served} of {declared}"));
                }
            }
        }
        let popped = self.queues[s].pop_front();
        debug_assert_eq!(popped, Some(ri));
        self.release_kv(ri);
        let st = &mut self.rs[ri];
        st.admitted = false;
        let req = &self.requests[ri];
        if stage + 1 < req.stages.len() {
            let next = self.instance_of(ri, stage + 1);
            let hop = if self.placement.host(next) != self.placement.host(s) { self.cfg.per_hop } else { 0.0 };
            self.rs[ri].transport += hop;
            self.events.push(Event {
                timestamp: self.now + hop,
                kind: EventKind::Arrival,
                payload: ri as u64,
                stage: Some(stage + 1),
            });
        } else {
            if self.cluster.instances[s].category == Category::CuUp {
                let observed = self.now - self.rs[ri].stage_enter;
                self.estimators[s].update(observed);
            }
            self.finalize(ri);
        }
    }

    fn finalize(&mut self, ri: usize) {
        let req = &self.requests[ri];
        let st = &mut self.rs[ri];
        st.done = true;
        st.stage = None;
        let rec = CompletionRecord::new(req, self.now, st.transport);
        let g = req.class.group().index();
        self.window.total[g] += 1;
        if rec.met_deadline {
            self.window.met[g] += 1;
        }
        self.out.request_met[ri] = rec.met_deadline;
        self.out.completions.push(rec);
    }

    fn release_kv(&mut self, ri: usize) {
        if let Some(node) = self.rs[ri].kv_node.take() {
            self.kv[node] = (self.kv[node] - self.requests[ri].kv_cache).max(0.0);
        }
    }

    /// Puts waiting heads into service where memory allows.
    fn admit_heads(&mut self) {
        for s in 0..self.queues.len() {
            if self.frozen(s) {
                continue;
            }
            let Some(&ri) = self.queues[s].front() else { continue };
            if self.rs[ri].admitted {
                continue;
            }
            let gamma = self.requests[ri].kv_cache;
            let node = self.placement.host(s);
            if gamma > 0.0 {
                if self.weights[node] + self.kv[node] + gamma > self.cluster.nodes[node].vram_capacity {
                    continue;
                }
                self.kv[node] += gamma;
                self.rs[ri].kv_node = Some(node);
            }
            self.rs[ri].admitted = true;
        }
    }

    fn active_work(&self, ri: usize) -> ActiveWork<f64> {
        let r = &self.requests[ri];
        ActiveWork {
            request_id: r.request_id,
            arrival: r.arrival,
            deadline_budget: r.deadline_budget,
            resid_gpu: self.rs[ri].resid_gpu,
            resid_cpu: self.rs[ri].resid_cpu,
        }
    }

    fn ran_floor(&mut self, s: InstanceId, pending: &[ActiveWork<f64>]) -> f64 {
        let spec = &self.cluster.instances[s];
        let (transport, est) = match spec.category {
            Category::Du => {
                let cu = spec.cell_id.and_then(|c| self.cluster.cu_of_cell(c));
                (self.cfg.per_hop, cu.map_or(0.0, |cu| self.estimators[cu].value))
            }
            _ => (0.0, 0.0),
        };
        match compute_ran_floor(pending, spec.category, self.now, transport, est) {
            Ok(f) => f,
            Err(AllocError::InfeasibleFloor { request_id, .. }) => {
                if let Some(ri) = self.queues[s].iter().copied().find(|&ri| self.requests[ri].request_id == request_id) {
                    if !self.rs[ri].flagged_infeasible {
                        self.rs[ri].flagged_infeasible = true;
                        self.out.infeasible_floor_requests += 1;
                        debug!("t={:.6} RAN floor infeasible for request {request_id}", self.now);
                    }
                }
                // Protect whatever can still make its deadline.
                let gpu = spec.category == Category::Du;
                let work: f64 = pending.iter().map(|w| if gpu { w.resid_gpu } else { w.resid_cpu }).sum();
                let slack = pending
                    .iter()
                    .map(|w| w.slack(self.now) - transport - est)
                    .filter(|&x| x > 0.0)
                    .fold(f64::INFINITY, f64::min);
                if slack.is_finite() {
                    work / slack
                } else {
                    0.0
                }
            }
            Err(e) => unreachable!("{e}"),
        }
    }

    fn reallocate(&mut self) {
        for node in 0..self.cluster.num_nodes() {
            let mut ids = Vec::new();
            let mut loads = Vec::new();
            let mut ran = Vec::new();
            let residents: Vec<InstanceId> = self.placement.residents(node).collect();
            for s in residents {
                self.alloc.gpu[s] = 0.0;
                self.alloc.cpu[s] = 0.0;
                self.floor_gpu[s] = 0.0;
                if self.frozen(s) {
                    continue;
                }
                let Some(&head) = self.queues[s].front() else { continue };
                if !self.rs[head].admitted {
                    continue;
                }
                let pending: Vec<ActiveWork<f64>> = self.queues[s].iter().map(|&ri| self.active_work(ri)).collect();
                let mut load: InstanceLoad<f64> = aggregate_load(s, &pending, self.now, self.cfg.epsilon);
                let category = self.cluster.instances[s].category;
                if category.is_ran() && self.cfg.ran_floors {
                    let f = self.ran_floor(s, &pending);
                    match category.dominant_resource() {
                        Resource::Gpu => load.gpu_floor = f,
                        Resource::Cpu => load.cpu_floor = f,
                    }
                }
                ids.push(s);
                loads.push(load);
                ran.push(category.is_ran());
            }
            if ids.is_empty() {
                continue;
            }
            let spec = &self.cluster.nodes[node];
            let a = allocate_node(&loads, &ran, spec.gpu_capacity, spec.cpu_capacity, self.cfg.alloc_rule);
            if a.gpu_overflow || a.cpu_overflow {
                self.out.floor_overflow_events += 1;
                warn!("t={:.6} RAN floors exceed capacity on node {node}; floors scaled", self.now);
            }
            let scale = if a.gpu_overflow {
                spec.gpu_capacity / loads.iter().map(|l| l.gpu_floor).sum::<f64>()
            } else {
                1.0
            };
            for (k, &s) in ids.iter().enumerate() {
                self.alloc.gpu[s] = a.gpu[k];
                self.alloc.cpu[s] = a.cpu[k];
                self.floor_gpu[s] = loads[k].gpu_floor * scale;
            }
        }
    }

    fn check_invariants(&mut self) {
        let n = self.cluster.num_nodes();
        let mut gpu = vec![0.0; n];
        let mut cpu = vec![0.0; n];
        for (s, &host) in self.placement.hosts().iter().enumerate() {
            if host >= n {
                self.out.violations.push(format!("residency: instance {s} on unknown node {host}"));
                continue;
            }
            if self.frozen(s) && (self.alloc.gpu[s] != 0.0 || self.alloc.cpu[s] != 0.0) {
                self.out.violations.push(format!("t={} reconfiguring instance {s} holds capacity", self.now));
            }
            gpu[host] += self.alloc.gpu[s];
            cpu[host] += self.alloc.cpu[s];
        }
        for (node, spec) in self.cluster.nodes.iter().enumerate() {
            if gpu[node] > spec.gpu_capacity * (1.0 + 1e-12) || cpu[node] > spec.cpu_capacity * (1.0 + 1e-12) {
                self.out.violations.push(format!("t={} capacity exceeded on node {node}", self.now));
            }
            if self.weights[node] + self.kv[node] > spec.vram_capacity * (1.0 + 1e-12) {
                self.out.violations.push(format!("t={} memory exceeded on node {node}", self.now));
            }
        }
    }

    fn record_trace(&mut self, kind: EventKind, payload: u64) {
        let n = self.cluster.num_nodes();
        let mut gpu = vec![0.0; n];
        let mut cpu = vec![0.0; n];
        for (s, &host) in self.placement.hosts().iter().enumerate() {
            gpu[host] += self.alloc.gpu[s];
            cpu[host] += self.alloc.cpu[s];
        }
        for (node, spec) in self.cluster.nodes.iter().enumerate() {
            gpu[node] /= spec.gpu_capacity;
            cpu[node] /= spec.cpu_capacity;
        }
        self.out.trace.push(TraceRecord { timestamp: self.now, kind, payload, gpu_util: gpu, cpu_util: cpu });
    }

    /// State view for placement policies at the current time.
    pub fn snapshot(&self, epoch: usize) -> EpochSnapshot {
        let span = (self.now - self.window.start).max(f64::MIN_POSITIVE);
        let nodes = self
            .cluster
            .nodes
            .iter()
            .map(|spec| {
                let n = spec.node_id;
                let used = self.weights[n] + self.kv[n];
                NodeState {
                    node_id: n,
                    gpu_capacity: spec.gpu_capacity,
                    cpu_capacity: spec.cpu_capacity,
                    vram_capacity: spec.vram_capacity,
                    gpu_util: self.window.served_gpu[n] / (spec.gpu_capacity * span),
                    cpu_util: self.window.served_cpu[n] / (spec.cpu_capacity * span),
                    ran_floor_util: self.window.floor_gpu[n] / (spec.gpu_capacity * span),
                    vram_used: used,
                    vram_headroom: spec.vram_capacity - used,
                }
            })
            .collect();
        let instances = self
            .cluster
            .instances
            .iter()
            .map(|spec| {
                let s = spec.instance_id;
                let host = self.placement.host(s);
                let (bg, bc) = self.queues[s]
                    .iter()
                    .fold((0.0, 0.0), |(g, c), &ri| (g + self.rs[ri].resid_gpu, c + self.rs[ri].resid_cpu));
                let node = &self.cluster.nodes[host];
                let backlog_seconds = match spec.category.dominant_resource() {
                    Resource::Gpu => bg / node.gpu_capacity,
                    Resource::Cpu => bc / node.cpu_capacity,
                };
                InstanceState {
                    instance_id: s,
                    category: spec.category,
                    host,
                    weight_footprint: spec.weight_footprint,
                    reconfig_delay: spec.reconfig_delay,
                    backlog_gpu_work: bg,
                    backlog_cpu_work: bc,
                    backlog_seconds,
                    active_requests: self.queues[s].len(),
                    reconfiguring: self.frozen(s),
                    offered_gpu_rate: self.window.offered_gpu[s] / span,
                    offered_cpu_rate: self.window.offered_cpu[s] / span,
                }
            })
            .collect();
        let mut recent = [1.0; 3];
        for g in ClassGroup::ALL {
            let i = g.index();
            if self.window.total[i] > 0 {
                recent[i] = self.window.met[i] as f64 / self.window.total[i] as f64;
            }
        }
        EpochSnapshot {
            epoch,
            timestamp: self.now,
            epoch_interval: self.cfg.epoch_interval,
            nodes,
            instances,
            recent_fulfillment: recent,
        }
    }

    fn on_epoch(&mut self, epoch: usize, policy: &mut dyn EpochPolicy) {
        let snapshot = self.snapshot(epoch);
        let movable = policy.movable();
        let candidates = generate_candidates(self.cluster, &self.placement, &movable);
        let decision = {
            let ctx = EpochContext {
                cluster: self.cluster,
                placement: &self.placement,
                snapshot: &snapshot,
                candidates: &candidates,
            };
            policy.decide(&ctx)
        };
        let proposed = decision.action.unwrap_or(MigrationAction::NoOp);
        let (committed, rejection) = match self.commit_migration(proposed, &candidates, epoch) {
            Ok(()) => (proposed, None),
            Err(reason) => {
                warn!("t={:.3} epoch {epoch}: rejected {proposed}: {reason}", self.now);
                self.out.rejected_actions += 1;
                (MigrationAction::NoOp, Some(reason))
            }
        };
        self.out.epochs.push(EpochRecord {
            epoch,
            timestamp: self.now,
            snapshot,
            movable_instances: movable_count(self.cluster, &movable),
            candidates,
            shortlist: decision.shortlist,
            committed,
            rejection,
            note: decision.note,
        });
        self.window = Window::new(self.now, self.cluster.num_nodes(), self.cluster.instances.len());
    }

    /// Applies a move: residency flips now, the instance is unavailable for
    /// its reconfiguration delay, and its queue waits frozen.
    pub fn commit_migration(
        &mut self,
        action: MigrationAction,
        candidates: &[MigrationAction],
        epoch: usize,
    ) -> Result<(), String> {
        let MigrationAction::Move { instance_id: s, from_node, to_node } = action else {
            return Ok(());
        };
        if !candidates.contains(&action) {
            return Err("not a member of the feasible candidate set".into());
        }
        if self.placement.is_reconfiguring(s) {
            return Err("instance is already reconfiguring".into());
        }
        if self.placement.host(s) != from_node {
            return Err(format!("instance {s} is not on node {from_node}"));
        }
        let spec = &self.cluster.instances[s];
        let dst = &self.cluster.nodes[to_node];
        if self.weights[to_node] + self.kv[to_node] + spec.weight_footprint > dst.vram_capacity {
            return Err(format!("destination node {to_node} lacks memory"));
        }
        if let Some(&head) = self.queues[s].front() {
            self.release_kv(head);
            self.rs[head].admitted = false;
        }
        let until = self.now + spec.reconfig_delay;
        self.weights[from_node] -= spec.weight_footprint;
        self.weights[to_node] += spec.weight_footprint;
        self.placement.relocate(s, to_node, until);
        self.alloc.gpu[s] = 0.0;
        self.alloc.cpu[s] = 0.0;
        self.floor_gpu[s] = 0.0;
        self.events.push(Event { timestamp: until, kind: EventKind::ReconfigEnd, payload: s as u64, stage: None });
        self.out.migrations.push(MigrationRecord {
            epoch,
            timestamp: self.now,
            instance_id: s,
            category: spec.category,
            from_node,
            to_node,
            available_at: until,
        });
        Ok(())
    }

    fn finish(mut self) -> SimOutcome {
        for (ri, st) in self.rs.iter().enumerate() {
            if !st.done {
                let r = &self.requests[ri];
                self.out.unfinished.push(UnfinishedRequest {
                    request_id: r.request_id,
                    class: r.class,
                    arrival: r.arrival,
                    stage: st.stage,
                });
            }
        }
        self.out.end_time = self.now;
        self.out
    }
}

/// Runs one scenario end to end.
pub fn simulate(
    cluster: &Cluster,
    placement: Placement,
    requests: &[Request],
    cfg: SimConfig,
    policy: Option<&mut dyn EpochPolicy>,
) -> Result<SimOutcome, ModelError> {
    Ok(Simulation::new(cluster, placement, requests, cfg)?.run(policy))
}

/// Class-group fulfillment of requests arriving in `[start, end)`; empty groups report 1.0.
pub fn window_fulfillment(requests: &[Request], met: &[bool], start: f64, end: f64) -> [f64; 3] {
    let mut hit = [0usize; 3];
    let mut total = [0usize; 3];
    for (r, &ok) in requests.iter().zip(met) {
        if r.arrival >= start && r.arrival < end {
            let g = r.class.group().index();
            total[g] += 1;
            hit[g] += usize::from(ok);
        }
    }
    let mut out = [1.0; 3];
    for g in 0..3 {
        if total[g] > 0 {
            out[g] = hit[g] as f64 / total[g] as f64;
        }
    }
    out
}
