use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::allocator::AllocRule;
use crate::critic::{encode_features, train, CriticModel, TrainReport, TrainingSample};
use crate::model::{Cluster, Placement, Request};
use crate::placement::{
    Agent, AgentExchange, GameController, HafController, LlmClient, LyapunovController, MigrationAction,
};
use crate::sim::{simulate, window_fulfillment, EpochPolicy, SimConfig, SimOutcome};
use crate::workload::{ai_pool_capacity, generate, measured_rho, scale_to_rho, RhoScope};

use super::config::{AgentBackend, AgentConfig, ExperimentConfig, PolicyKind};
use super::metrics::{compute_report, median, MetricsReport, ReportContext};
use super::ExperimentError;

/// A generated, load-scaled workload on a concrete cluster.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub rho_target: f64,
    pub cluster: Cluster,
    pub placement: Placement,
    pub requests: Vec<Request>,
    /// Average RAN floor reservation per node from the warm-up window, FLOPs/s.
    pub floors: Vec<f64>,
    pub capacity: f64,
    pub rho_realized: f64,
    pub rho_cluster: f64,
}

/// Builds the workload for `seed` and scales it to `rho`. The RAN floor
/// estimate comes from a static warm-up run over the first part of the horizon.
pub fn build_scenario(cfg: &ExperimentConfig, seed: u64, rho: f64) -> Result<Scenario, ExperimentError> {
    let (cluster, placement) = cfg.cluster()?.build()?;
    let mut wcfg = cfg.workload.clone();
    wcfg.seed = seed;
    wcfg.rho_target = rho;
    let horizon = wcfg.horizon;
    let base = generate(&cluster, &wcfg)?;
    let zero = vec![0.0; cluster.num_nodes()];
    let raw_capacity = ai_pool_capacity(&cluster, &zero, cfg.rho_scope);
    let first = scale_to_rho(&base, raw_capacity, horizon, rho)?;

    let warmup = (cfg.warmup_fraction * horizon).max(cfg.sim.epoch_interval.min(horizon));
    let warm_requests: Vec<Request> = first.iter().filter(|r| r.arrival < warmup).cloned().collect();
    let warm_cfg = SimConfig { horizon: warmup, drain: false, trace: false, ..cfg.sim.clone() };
    let warm = simulate(&cluster, placement.clone(), &warm_requests, warm_cfg, None)?;
    let floors: Vec<f64> = warm.gpu_floor_integral.iter().map(|f| f / warmup).collect();

    let capacity = ai_pool_capacity(&cluster, &floors, cfg.rho_scope);
    let requests = scale_to_rho(&base, capacity, horizon, rho)?;
    let rho_realized = measured_rho(&requests, capacity, horizon);
    let rho_cluster = measured_rho(&requests, ai_pool_capacity(&cluster, &floors, RhoScope::Cluster), horizon);
    Ok(Scenario { seed, rho_target: rho, cluster, placement, requests, floors, capacity, rho_realized, rho_cluster })
}

/// Simulation output plus the derived report.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: MetricsReport,
    pub outcome: SimOutcome,
    pub exchanges: Vec<AgentExchange>,
}

pub fn build_agent(cfg: &AgentConfig, epoch_interval: f64) -> Agent {
    match cfg.backend {
        AgentBackend::Stub => Agent::Stub(cfg.stub.clone()),
        AgentBackend::Llm => {
            Agent::Llm { client: LlmClient::new(cfg.llm.clone(), epoch_interval), stub: cfg.stub.clone() }
        }
    }
}

fn alloc_rule(cfg: &ExperimentConfig, kind: PolicyKind) -> AllocRule {
    match kind {
        PolicyKind::Haf | PolicyKind::HafNocritic | PolicyKind::Static => cfg.sim.alloc_rule,
        PolicyKind::RoundRobin => AllocRule::EqualShare,
        PolicyKind::Lyapunov => AllocRule::MaxWeight,
        PolicyKind::Game => AllocRule::Market,
        PolicyKind::AlphaSplit => AllocRule::AlphaSplit { alpha: cfg.policy.alpha },
    }
}

/// Runs one policy on a prepared scenario.
pub fn run_policy(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    kind: PolicyKind,
    agent: &AgentConfig,
    critic: Option<&CriticModel<f64>>,
) -> Result<RunArtifacts, ExperimentError> {
    let sim_cfg = SimConfig { horizon: cfg.workload.horizon, alloc_rule: alloc_rule(cfg, kind), ..cfg.sim.clone() };
    let delta = sim_cfg.epoch_interval;
    let mut haf = match kind {
        PolicyKind::Haf => {
            let model = critic.ok_or_else(|| {
                ExperimentError::Config("policy haf needs a critic model; set critic.model_path or train one".into())
            })?;
            Some(
                HafController::new(build_agent(agent, delta), Some(model.clone()), cfg.critic.class_weights)
                    .with_movable(cfg.policy.haf_movable.clone()),
            )
        }
        PolicyKind::HafNocritic => Some(
            HafController::new(build_agent(agent, delta), None, cfg.critic.class_weights)
                .with_movable(cfg.policy.haf_movable.clone()),
        ),
        _ => None,
    };
    if let Some(h) = haf.as_mut() {
        h.archive_prompts = sim_cfg.trace;
    }
    let mut lyap = LyapunovController { cfg: cfg.policy.lyapunov.clone(), movable: cfg.policy.baseline_movable.clone() };
    let mut game = GameController { cfg: cfg.policy.game.clone(), movable: cfg.policy.baseline_movable.clone() };
    let policy: Option<&mut dyn EpochPolicy> = match kind {
        PolicyKind::Haf | PolicyKind::HafNocritic => haf.as_mut().map(|h| h as &mut dyn EpochPolicy),
        PolicyKind::Lyapunov => Some(&mut lyap),
        PolicyKind::Game => Some(&mut game),
        PolicyKind::Static | PolicyKind::RoundRobin | PolicyKind::AlphaSplit => None,
    };
    let outcome = simulate(&scenario.cluster, scenario.placement.clone(), &scenario.requests, sim_cfg, policy)?;
    let (degraded_epochs, exchanges) = match haf {
        Some(h) => (h.degraded_epochs, h.exchanges),
        None => (0, Vec::new()),
    };
    let report = compute_report(
        &scenario.requests,
        &outcome,
        ReportContext {
            policy: kind.label().to_string(),
            seed: scenario.seed,
            rho_target: scenario.rho_target,
            rho_realized: scenario.rho_realized,
            rho_cluster: scenario.rho_cluster,
            epoch_interval: delta,
            degraded_epochs,
            critic_hash: if kind.needs_critic() { critic.map(CriticModel::hash) } else { None },
        },
    );
    Ok(RunArtifacts { report, outcome, exchanges })
}

/// Loads the configured critic, if any.
pub fn load_critic(cfg: &ExperimentConfig) -> Result<Option<CriticModel<f64>>, ExperimentError> {
    match &cfg.critic.model_path {
        Some(p) => Ok(Some(CriticModel::load(p)?)),
        None => Ok(None),
    }
}

/// Runs the configured policy for one seed at the configured load.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    seed: u64,
    critic: Option<&CriticModel<f64>>,
) -> Result<RunArtifacts, ExperimentError> {
    let scenario = build_scenario(cfg, seed, cfg.workload.rho_target)?;
    run_policy(cfg, &scenario, cfg.policy.kind, &cfg.agent, critic)
}

/// One sweep cell aggregated over seeds by the median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub policy: PolicyKind,
    pub qr_fulfill: f64,
    pub qe_fulfill: f64,
    pub overall: f64,
    pub migrations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub rho: f64,
    pub policy: PolicyKind,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub reports: Vec<MetricsReport>,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CellFailure>,
}

/// Every (rho, policy, seed) cell; failed cells are recorded and skipped.
pub fn run_load_sweep(
    cfg: &ExperimentConfig,
    rhos: &[f64],
    policies: &[PolicyKind],
    critic: Option<&CriticModel<f64>>,
) -> Result<SweepResult, ExperimentError> {
    if rhos.is_empty() || policies.is_empty() {
        return Err(ExperimentError::Config("a sweep needs at least one load and one policy".into()));
    }
    let mut out = SweepResult::default();
    for &rho in rhos {
        let mut scenarios = Vec::new();
        for &seed in &cfg.seeds {
            match build_scenario(cfg, seed, rho) {
                Ok(s) => scenarios.push(s),
                Err(e) => {
                    for &policy in policies {
                        out.failures.push(CellFailure { rho, policy, seed, error: e.to_string() });
                    }
                }
            }
        }
        for &policy in policies {
            let mut reports = Vec::new();
            for s in &scenarios {
                match run_policy(cfg, s, policy, &cfg.agent, critic) {
                    Ok(a) => reports.push(a.report),
                    Err(e) => out.failures.push(CellFailure { rho, policy, seed: s.seed, error: e.to_string() }),
                }
            }
            if reports.is_empty() {
                continue;
            }
            let col = |f: fn(&MetricsReport) -> f64| median(&reports.iter().map(f).collect::<Vec<_>>());
            info!("sweep rho={rho} policy={policy}: {} seeds", reports.len());
            out.rows.push(SweepRow {
                rho,
                policy,
                qr_fulfill: col(|r| r.qr_fulfill),
                qe_fulfill: col(|r| r.qe_fulfill),
                overall: col(|r| r.overall),
                migrations: col(|r| r.migrations_total as f64),
            });
            out.reports.extend(reports);
        }
    }
    Ok(out)
}

/// Agent entry of an ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedAgent {
    pub name: String,
    pub agent: AgentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub agent: String,
    pub overall_critic: f64,
    pub overall_nocritic: f64,
    pub migrations_critic: f64,
    pub migrations_nocritic: f64,
    pub critic_gain: f64,
    /// Some epochs fell back to the stub because the agent was unreachable or unparseable.
    pub substituted: bool,
}

/// HAF with and without the critic for each agent, medians over seeds.
pub fn run_ablation(
    cfg: &ExperimentConfig,
    agents: &[NamedAgent],
    critic: &CriticModel<f64>,
) -> Result<Vec<AblationRow>, ExperimentError> {
    let scenarios = cfg
        .seeds
        .iter()
        .map(|&s| build_scenario(cfg, s, cfg.workload.rho_target))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for a in agents {
        let mut with = Vec::new();
        let mut without = Vec::new();
        for s in &scenarios {
            with.push(run_policy(cfg, s, PolicyKind::Haf, &a.agent, Some(critic))?.report);
            without.push(run_policy(cfg, s, PolicyKind::HafNocritic, &a.agent, None)?.report);
        }
        let med = |v: &[MetricsReport], f: fn(&MetricsReport) -> f64| median(&v.iter().map(f).collect::<Vec<_>>());
        let substituted = with.iter().chain(&without).any(|r| r.degraded_epochs > 0);
        if substituted {
            warn!("agent {} was substituted by the stub in some epochs", a.name);
        }
        let overall_critic = med(&with, |r| r.overall);
        let overall_nocritic = med(&without, |r| r.overall);
        rows.push(AblationRow {
            agent: a.name.clone(),
            overall_critic,
            overall_nocritic,
            migrations_critic: med(&with, |r| r.migrations_total as f64),
            migrations_nocritic: med(&without, |r| r.migrations_total as f64),
            critic_gain: overall_critic - overall_nocritic,
            substituted,
        });
    }
    Ok(rows)
}

/// One logged epoch: the committed action in its state and the realized
/// class fulfillment of arrivals over the following interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSample {
    pub seed: u64,
    pub rho: f64,
    pub epoch: usize,
    pub timestamp: f64,
    pub action: MigrationAction,
    pub features: Vec<f64>,
    pub label: [f64; 3],
}

impl From<EpochSample> for TrainingSample {
    fn from(s: EpochSample) -> Self {
        TrainingSample { features: s.features, label: s.label }
    }
}

/// Samples from one finished run.
pub fn epoch_samples(scenario: &Scenario, outcome: &SimOutcome, epoch_interval: f64) -> Vec<EpochSample> {
    outcome
        .epochs
        .iter()
        .map(|e| EpochSample {
            seed: scenario.seed,
            rho: scenario.rho_target,
            epoch: e.epoch,
            timestamp: e.timestamp,
            action: e.committed,
            features: encode_features(&e.snapshot, &e.committed),
            label: window_fulfillment(&scenario.requests, &outcome.request_met, e.timestamp, e.timestamp + epoch_interval),
        })
        .collect()
}

/// Epsilon-greedy HAF runs without a critic, logging every epoch.
pub fn collect_critic_data(cfg: &ExperimentConfig) -> Result<Vec<EpochSample>, ExperimentError> {
    let c = &cfg.collect;
    if c.rhos.is_empty() {
        return Err(ExperimentError::Config("collect.rhos is empty".into()));
    }
    let sim_cfg = SimConfig { horizon: cfg.workload.horizon, trace: false, ..cfg.sim.clone() };
    let mut out = Vec::new();
    for i in 0..c.runs {
        let seed = c.first_seed + i as u64;
        let scenario = build_scenario(cfg, seed, c.rhos[i % c.rhos.len()])?;
        let mut policy = HafController::new(build_agent(&cfg.agent, sim_cfg.epoch_interval), None, cfg.critic.class_weights)
            .with_movable(cfg.policy.haf_movable.clone())
            .with_exploration(c.epsilon, seed);
        let outcome =
            simulate(&scenario.cluster, scenario.placement.clone(), &scenario.requests, sim_cfg.clone(), Some(&mut policy))?;
        out.extend(epoch_samples(&scenario, &outcome, sim_cfg.epoch_interval));
    }
    Ok(out)
}

/// Trains a critic on collected samples with the configured hyperparameters.
pub fn train_critic(cfg: &ExperimentConfig, samples: &[EpochSample]) -> Result<TrainReport<f64>, ExperimentError> {
    let nodes = cfg.cluster()?.nodes.len();
    let samples: Vec<TrainingSample> = samples.iter().cloned().map(Into::into).collect();
    Ok(train::<f64>(&samples, nodes, &cfg.train)?)
}
