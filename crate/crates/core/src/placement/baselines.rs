//! Comparison policies. These are concrete instantiations of the usual
//! textbook controllers, not reproductions of any particular implementation.

use serde::{Deserialize, Serialize};

use crate::allocator::{allocate_node, AllocRule, InstanceLoad, NodeAllocation};
use crate::model::{NodeId, Resource};
use crate::scalar::Scalar;

use super::{EpochSnapshot, MigrationAction};

const RESOURCES: [Resource; 2] = [Resource::Gpu, Resource::Cpu];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovConfig {
    /// Weight of the reconfiguration penalty against queue drift.
    pub v: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig { v: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub max_rounds: usize,
    /// Minimum cost reduction for a player to switch nodes.
    pub min_gain: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig { max_rounds: 50, min_gain: 1e-3 }
    }
}

fn pressures(snapshot: &EpochSnapshot) -> [Vec<f64>; 2] {
    [snapshot.pressure(Resource::Gpu), snapshot.pressure(Resource::Cpu)]
}

fn quadratic(p: &[Vec<f64>; 2]) -> f64 {
    p.iter().flat_map(|v| v.iter()).map(|x| x * x).sum()
}

/// Change in `sum P^2` over both resources if `instance` moved from `from` to `to`.
fn drift(snapshot: &EpochSnapshot, p: &[Vec<f64>; 2], instance: usize, from: NodeId, to: NodeId) -> f64 {
    let inst = &snapshot.instances[instance];
    let mut after = p.clone();
    for (k, r) in RESOURCES.iter().enumerate() {
        let d = inst.demand(*r, snapshot.epoch_interval);
        after[k][from] -= d / snapshot.nodes[from].capacity(*r);
        after[k][to] += d / snapshot.nodes[to].capacity(*r);
    }
    quadratic(&after) - quadratic(p)
}

/// Drift-plus-penalty placement: the candidate minimizing the change of the
/// quadratic queue-pressure potential plus `V * R_s / Delta`. NoOp scores zero
/// and wins unless some move is strictly better.
pub fn lyapunov_step(snapshot: &EpochSnapshot, candidates: &[MigrationAction], cfg: &LyapunovConfig) -> MigrationAction {
    let p = pressures(snapshot);
    let mut best = (0.0, MigrationAction::NoOp);
    for a in candidates {
        if let MigrationAction::Move { instance_id, from_node, to_node } = *a {
            let penalty = snapshot.instances[instance_id].reconfig_delay / snapshot.epoch_interval;
            let score = drift(snapshot, &p, instance_id, from_node, to_node) + cfg.v * penalty;
            if score < best.0 {
                best = (score, *a);
            }
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub action: MigrationAction,
    pub rounds: usize,
    pub converged: bool,
    /// Host of every instance at the end of the dynamics.
    pub hosts: Vec<NodeId>,
}

/// Best-response dynamics over the movable instances: each player moves to the
/// destination that minimizes the pressure it experiences on its dominant
/// resource. The first instance whose equilibrium host differs from its
/// current one is migrated.
pub fn game_theory_step(snapshot: &EpochSnapshot, candidates: &[MigrationAction], cfg: &GameConfig) -> BestResponse {
    let mut hosts: Vec<NodeId> = snapshot.instances.iter().map(|s| s.host).collect();
    let mut p = pressures(snapshot);
    let mut players: Vec<usize> = candidates.iter().filter_map(|a| a.instance()).collect();
    players.dedup();
    let dests = |s: usize| {
        candidates.iter().filter_map(move |a| match *a {
            MigrationAction::Move { instance_id, to_node, .. } if instance_id == s => Some(to_node),
            _ => None,
        })
    };
    let mut rounds = 0;
    let mut converged = false;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let mut moved = false;
        for &s in &players {
            let inst = &snapshot.instances[s];
            let r = inst.category.dominant_resource();
            let k = usize::from(r == Resource::Cpu);
            let d = inst.demand(r, snapshot.epoch_interval);
            let here = hosts[s];
            let current = p[k][here];
            let mut best: Option<(f64, NodeId)> = None;
            for to in dests(s).chain(std::iter::once(snapshot.instances[s].host)) {
                if to == here {
                    continue;
                }
                let cost = p[k][to] + d / snapshot.nodes[to].capacity(r);
                if best.map_or(true, |(c, n)| cost < c || (cost == c && to < n)) {
                    best = Some((cost, to));
                }
            }
            if let Some((cost, to)) = best {
                if cost < current - cfg.min_gain {
                    for (kk, rr) in RESOURCES.iter().enumerate() {
                        let dd = inst.demand(*rr, snapshot.epoch_interval);
                        p[kk][here] -= dd / snapshot.nodes[here].capacity(*rr);
                        p[kk][to] += dd / snapshot.nodes[to].capacity(*rr);
                    }
                    hosts[s] = to;
                    moved = true;
                }
            }
        }
        if !moved {
            converged = true;
            break;
        }
    }
    let action = players
        .iter()
        .find_map(|&s| {
            let from = snapshot.instances[s].host;
            let a = MigrationAction::Move { instance_id: s, from_node: from, to_node: hosts[s] };
            (hosts[s] != from && candidates.contains(&a)).then_some(a)
        })
        .unwrap_or(MigrationAction::NoOp);
    BestResponse { action, rounds, converged, hosts }
}

/// Per-node split of the capacity above the floors: `alpha` to RAN functions,
/// the rest to AI services; a class alone on a node takes everything.
pub fn alpha_split_alloc<T: Scalar>(
    loads: &[InstanceLoad<T>],
    ran: &[bool],
    gpu_capacity: T,
    cpu_capacity: T,
    alpha: f64,
) -> NodeAllocation<T> {
    allocate_node(loads, ran, gpu_capacity, cpu_capacity, AllocRule::AlphaSplit { alpha })
}

/// Cycles through the replicas of a service.
#[derive(Debug, Clone, Default)]
pub struct RoundRobinDispatcher {
    next: usize,
}

impl RoundRobinDispatcher {
    pub fn dispatch(&mut self, replicas: &[NodeId]) -> Option<NodeId> {
        if replicas.is_empty() {
            return None;
        }
        let n = replicas[self.next % replicas.len()];
        self.next = self.next.wrapping_add(1);
        Some(n)
    }
}
