mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use common::two_node_cluster;
use haf_core::experiment::ExperimentConfig;
use haf_core::model::{Category, Cluster, InstanceSpec, NodeSpec, Placement};
use haf_core::placement::{
    alpha_split_alloc, build_prompt, candidate_bound, game_theory_step, generate_candidates, llm_shortlist,
    lyapunov_step, stub_score, stub_shortlist, EpochSnapshot, GameConfig, InstanceState, LlmClient, LlmClientConfig,
    LyapunovConfig, MigrationAction, NodeState, StubConfig,
};
use haf_core::sim::{SimConfig, Simulation};
use haf_core::InstanceLoad;

const CAP: f64 = 1e14;
const DELTA: f64 = 5.0;

/// Snapshot of `nodes` identical GPU nodes; each instance is
/// `(category, host, GPU demand as a fraction of one node)`, all of it backlog.
fn snapshot(nodes: usize, instances: &[(Category, usize, f64)]) -> EpochSnapshot {
    EpochSnapshot {
        epoch: 1,
        timestamp: DELTA,
        epoch_interval: DELTA,
        nodes: (0..nodes)
            .map(|n| NodeState {
                node_id: n,
                gpu_capacity: CAP,
                cpu_capacity: 16.0,
                vram_capacity: 80.0,
                gpu_util: 0.0,
                cpu_util: 0.0,
                ran_floor_util: 0.0,
                vram_used: 0.0,
                vram_headroom: 80.0,
            })
            .collect(),
        instances: instances
            .iter()
            .enumerate()
            .map(|(i, &(category, host, demand))| InstanceState {
                instance_id: i,
                category,
                host,
                weight_footprint: 1.0,
                reconfig_delay: if category == Category::LargeAi { 8.0 } else { 0.5 },
                backlog_gpu_work: demand * CAP * DELTA,
                backlog_cpu_work: 0.0,
                backlog_seconds: demand * DELTA,
                active_requests: 1,
                reconfiguring: false,
                offered_gpu_rate: 0.0,
                offered_cpu_rate: 0.0,
            })
            .collect(),
        recent_fulfillment: [1.0; 3],
    }
}

fn all_moves(snap: &EpochSnapshot) -> Vec<MigrationAction> {
    let mut out = vec![MigrationAction::NoOp];
    for s in &snap.instances {
        for n in 0..snap.nodes.len() {
            if n != s.host {
                out.push(MigrationAction::Move { instance_id: s.instance_id, from_node: s.host, to_node: n });
            }
        }
    }
    out
}

fn mv(instance_id: usize, from_node: usize, to_node: usize) -> MigrationAction {
    MigrationAction::Move { instance_id, from_node, to_node }
}

#[test]
fn full_destinations_leave_only_noop() {
    let node = |id| NodeSpec { node_id: id, gpu_capacity: CAP, cpu_capacity: 8.0, vram_capacity: 30.0, name: String::new() };
    let inst = |id| InstanceSpec {
        instance_id: id,
        category: Category::LargeAi,
        weight_footprint: 28.0,
        reconfig_delay: 8.0,
        cell_id: None,
    };
    let cluster = Cluster::new(vec![node(0), node(1)], vec![inst(0), inst(1)]).unwrap();
    let placement = Placement::new(&cluster, vec![0, 1]).unwrap();
    assert_eq!(generate_candidates(&cluster, &placement, &Category::ALL), vec![MigrationAction::NoOp]);
}

#[test]
fn twelve_movable_on_six_nodes() {
    let cfg = ExperimentConfig::desk();
    let (cluster, placement) = cfg.cluster().unwrap().build().unwrap();
    let movable = [Category::Du, Category::CuUp];
    let c = generate_candidates(&cluster, &placement, &movable);
    assert_eq!(candidate_bound(12, 6), 61);
    assert!(c.len() <= 61);
    assert_eq!(c[0], MigrationAction::NoOp);
    let all = generate_candidates(&cluster, &placement, &Category::ALL);
    assert!(all.len() <= candidate_bound(cluster.instances.len(), 6));
}

#[test]
fn reconfiguring_instance_contributes_no_moves() {
    let (cluster, placement) = two_node_cluster();
    let before = generate_candidates(&cluster, &placement, &Category::ALL);
    let mut sim = Simulation::new(&cluster, placement, &[], SimConfig::default()).unwrap();
    sim.commit_migration(mv(3, 0, 1), &before, 1).unwrap();
    let after = generate_candidates(&cluster, sim.placement(), &Category::ALL);
    assert!(after.iter().all(|a| a.instance() != Some(3)));
    assert_eq!(after.len(), before.len() - 1);
}

#[test]
fn stub_prefers_the_largest_backlog() {
    let snap = snapshot(
        2,
        &[(Category::LargeAi, 0, 0.45), (Category::SmallAi, 0, 0.5), (Category::SmallAi, 0, 0.25)],
    );
    let cfg = StubConfig::default();
    // Node 0 pressure 1.2; each move's gain is its own demand, less 0.1 R_s / Delta.
    assert!((stub_score(&snap, &mv(1, 0, 1), &cfg) - 0.49).abs() < 1e-12);
    assert!((stub_score(&snap, &mv(0, 0, 1), &cfg) - 0.29).abs() < 1e-12);
    let list = stub_shortlist(&snap, &all_moves(&snap), &cfg);
    assert_eq!(list, vec![mv(1, 0, 1), mv(0, 0, 1), mv(2, 0, 1)]);
}

#[test]
fn stub_falls_back_to_noop() {
    let snap = snapshot(2, &[(Category::LargeAi, 0, 0.05), (Category::SmallAi, 1, 0.0)]);
    assert_eq!(stub_shortlist(&snap, &all_moves(&snap), &StubConfig::default()), vec![MigrationAction::NoOp]);
    assert_eq!(stub_score(&snap, &MigrationAction::NoOp, &StubConfig::default()), 0.0);
}

#[test]
fn stub_breaks_ties_by_instance_then_destination() {
    let snap = snapshot(3, &[(Category::SmallAi, 0, 0.3), (Category::SmallAi, 0, 0.3)]);
    let list = stub_shortlist(&snap, &all_moves(&snap), &StubConfig::default());
    assert_eq!(list, vec![mv(0, 0, 1), mv(0, 0, 2), mv(1, 0, 1)]);
}

#[test]
fn stub_penalizes_ran_floor_pressure() {
    let snap = snapshot(2, &[(Category::Du, 0, 0.4), (Category::SmallAi, 0, 0.4)]);
    let cfg = StubConfig::default();
    let du = stub_score(&snap, &mv(0, 0, 1), &cfg);
    let ai = stub_score(&snap, &mv(1, 0, 1), &cfg);
    assert!((du - (0.4 - 0.01 - 0.4)).abs() < 1e-12);
    assert!(ai > du);
}

#[test]
fn prompt_is_deterministic_and_asks_for_k() {
    let (cluster, placement) = two_node_cluster();
    let snap = Simulation::new(&cluster, placement.clone(), &[], SimConfig::default()).unwrap().snapshot(1);
    let cands = generate_candidates(&cluster, &placement, &Category::ALL);
    let a = build_prompt(&cluster, &snap, &cands, 3);
    assert_eq!(a, build_prompt(&cluster, &snap, &cands, 3));
    assert!(a.contains("at most 3 candidate ids"));
    assert!(a.contains(&format!("[{}]", cands.len() - 1)));
    let only = build_prompt(&cluster, &snap, &[MigrationAction::NoOp], 3);
    assert!(only.contains("[0] no migration"));
    assert!(!only.contains("[1]"));
}

/// Serves `reply` as the assistant message to every request after `delay`.
fn mock_server(reply: &'static str, delay: Duration) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            thread::sleep(delay);
            let payload = serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": reply } }] })
                .to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                payload.len(),
                payload
            );
        }
    });
    format!("http://{addr}/v1/chat/completions")
}

fn client(endpoint: String, timeout: f64) -> LlmClient {
    let cfg = LlmClientConfig { endpoint, timeout: Some(timeout), retries: 0, ..Default::default() };
    LlmClient::new(cfg, DELTA)
}

fn llm_fixture() -> (EpochSnapshot, Vec<MigrationAction>) {
    let snap = snapshot(3, &[(Category::SmallAi, 0, 0.3), (Category::SmallAi, 0, 0.3), (Category::SmallAi, 1, 0.1)]);
    let cands = all_moves(&snap);
    (snap, cands)
}

#[test]
fn agent_ids_map_to_candidates_in_order() {
    let (_, cands) = llm_fixture();
    let c = client(mock_server("Plan:\n```shortlist\n[5, 2, 0]\n```", Duration::ZERO), 5.0);
    let (list, degraded, reply) = llm_shortlist("prompt", &c, &cands, 3, Vec::new);
    assert_eq!(list, vec![cands[5], cands[2], cands[0]]);
    assert!(!degraded && reply.is_some());
}

#[test]
fn hallucinated_ids_are_dropped() {
    let (_, cands) = llm_fixture();
    let c = client(mock_server("```shortlist\n[4, 77, 1]\n```", Duration::ZERO), 5.0);
    let (list, degraded, _) = llm_shortlist("prompt", &c, &cands, 3, Vec::new);
    assert_eq!(list, vec![cands[4], cands[1]]);
    assert!(!degraded);
}

#[test]
fn unparseable_reply_falls_back_to_stub() {
    let (snap, cands) = llm_fixture();
    let stub = stub_shortlist(&snap, &cands, &StubConfig::default());
    let c = client(mock_server("Move the biggest model somewhere quieter.", Duration::ZERO), 5.0);
    let (list, degraded, _) = llm_shortlist("prompt", &c, &cands, 3, || stub.clone());
    assert_eq!(list, stub);
    assert!(degraded);
}

#[test]
fn slow_agent_times_out_to_stub() {
    let (snap, cands) = llm_fixture();
    let stub = stub_shortlist(&snap, &cands, &StubConfig::default());
    let c = client(mock_server("```shortlist\n[1]\n```", Duration::from_millis(1500)), 0.2);
    let started = std::time::Instant::now();
    let (list, degraded, reply) = llm_shortlist("prompt", &c, &cands, 3, || stub.clone());
    assert!(started.elapsed() < Duration::from_millis(1200));
    assert_eq!(list, stub);
    assert!(degraded && reply.is_none());
}

#[test]
fn unreachable_agent_falls_back() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let (_, cands) = llm_fixture();
    let c = client(format!("http://{addr}/v1/chat/completions"), 1.0);
    let (list, degraded, _) = llm_shortlist("prompt", &c, &cands, 3, || vec![MigrationAction::NoOp]);
    assert_eq!(list, vec![MigrationAction::NoOp]);
    assert!(degraded);
}

#[test]
fn lyapunov_without_penalty_minimizes_drift() {
    let snap = snapshot(2, &[(Category::LargeAi, 0, 0.6), (Category::SmallAi, 0, 0.4)]);
    let cands = all_moves(&snap);
    // Pressures (1.0, 0): moving 0.6 leaves 0.4^2 + 0.6^2 = 0.52, moving 0.4 leaves 0.6^2 + 0.4^2 as well;
    // the first strictly better candidate is kept.
    assert_eq!(lyapunov_step(&snap, &cands, &LyapunovConfig { v: 0.0 }), mv(0, 0, 1));
    // R_s of 8 s costs 1.6 with V = 1, more than the drift gain of 0.48.
    assert_eq!(lyapunov_step(&snap, &cands, &LyapunovConfig { v: 1.0 }), mv(1, 0, 1));
    let idle = snapshot(2, &[(Category::SmallAi, 0, 0.0)]);
    assert_eq!(lyapunov_step(&idle, &all_moves(&idle), &LyapunovConfig { v: 0.0 }), MigrationAction::NoOp);
}

#[test]
fn best_response_reaches_a_fixed_point() {
    let sym = snapshot(2, &[(Category::SmallAi, 0, 0.3), (Category::SmallAi, 1, 0.3)]);
    let br = game_theory_step(&sym, &all_moves(&sym), &GameConfig::default());
    assert!(br.converged && br.rounds <= GameConfig::default().max_rounds);
    assert_eq!(br.action, MigrationAction::NoOp);

    let skew = snapshot(2, &[(Category::SmallAi, 0, 0.3), (Category::SmallAi, 0, 0.3)]);
    let br = game_theory_step(&skew, &all_moves(&skew), &GameConfig::default());
    assert!(br.converged);
    assert_eq!(br.action, mv(0, 0, 1));
    assert_eq!(br.hosts, vec![1, 0]);
}

#[test]
fn alpha_one_leaves_ai_only_its_floor() {
    let loads = [
        InstanceLoad { instance_id: 0, resid_gpu_work: 1.0, resid_cpu_work: 0.0, urgency: 1.0, gpu_floor: 2.0, cpu_floor: 0.0 },
        InstanceLoad { instance_id: 1, resid_gpu_work: 1.0, resid_cpu_work: 0.0, urgency: 1.0, gpu_floor: 0.0, cpu_floor: 0.0 },
    ];
    let a = alpha_split_alloc(&loads, &[true, false], 10.0, 1.0, 1.0);
    assert_eq!(a.gpu, vec![10.0, 0.0]);
    let alone = alpha_split_alloc(&loads[1..], &[false], 10.0, 1.0, 1.0);
    assert_eq!(alone.gpu, vec![10.0]);
}
