use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::critic::{TrainConfig, DEFAULT_CLASS_WEIGHTS};
use crate::model::{Category, Cluster, InstanceSpec, NodeId, NodeSpec, Placement};
use crate::placement::{GameConfig, LlmClientConfig, LyapunovConfig, StubConfig, BASELINE_MOVABLE};
use crate::sim::SimConfig;
use crate::workload::{RhoScope, WorkloadConfig};

use super::ExperimentError;

const DESK_PRESET: &str = include_str!("../../presets/desk.toml");

/// Names accepted by `include = "..."` without a path.
pub const BUILTIN_PRESETS: &[&str] = &["desk"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Haf,
    HafNocritic,
    Static,
    RoundRobin,
    Lyapunov,
    Game,
    AlphaSplit,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Haf,
        PolicyKind::HafNocritic,
        PolicyKind::Static,
        PolicyKind::RoundRobin,
        PolicyKind::Lyapunov,
        PolicyKind::Game,
        PolicyKind::AlphaSplit,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Haf => "haf",
            PolicyKind::HafNocritic => "haf-nocritic",
            PolicyKind::Static => "static",
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::Lyapunov => "lyapunov",
            PolicyKind::Game => "game",
            PolicyKind::AlphaSplit => "alpha-split",
        }
    }

    pub fn needs_critic(self) -> bool {
        self == PolicyKind::Haf
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| format!("unknown policy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub nodes: Vec<NodeSpec>,
    pub instances: Vec<InstanceSpec>,
    /// Host node per instance id.
    pub initial_placement: Vec<NodeId>,
}

impl ClusterConfig {
    pub fn build(&self) -> Result<(Cluster, Placement), ExperimentError> {
        let cluster = Cluster::new(self.nodes.clone(), self.instances.clone())?;
        let placement = Placement::new(&cluster, self.initial_placement.clone())?;
        Ok((cluster, placement))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AgentBackend {
    #[default]
    Stub,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AgentConfig {
    pub backend: AgentBackend,
    /// Shortlist length and stub scoring weights.
    pub stub: StubConfig,
    pub llm: LlmClientConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticConfig {
    pub model_path: Option<PathBuf>,
    pub class_weights: [f64; 3],
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig { model_path: None, class_weights: DEFAULT_CLASS_WEIGHTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub haf_movable: Vec<Category>,
    pub baseline_movable: Vec<Category>,
    pub alpha: f64,
    pub lyapunov: LyapunovConfig,
    pub game: GameConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::Haf,
            haf_movable: Category::ALL.to_vec(),
            baseline_movable: BASELINE_MOVABLE.to_vec(),
            alpha: 0.5,
            lyapunov: LyapunovConfig::default(),
            game: GameConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub rhos: Vec<f64>,
    pub policies: Vec<PolicyKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { rhos: vec![0.75, 1.0, 1.25], policies: vec![PolicyKind::Haf, PolicyKind::Static] }
    }
}

/// Epsilon-greedy runs that produce critic training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    pub runs: usize,
    pub epsilon: f64,
    /// Load levels cycled across runs.
    pub rhos: Vec<f64>,
    pub first_seed: u64,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig { runs: 48, epsilon: 0.3, rhos: vec![0.75, 1.0, 1.25], first_seed: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub rho_scope: RhoScope,
    /// Fraction of the horizon simulated to estimate the average RAN floor reservation.
    pub warmup_fraction: f64,
    pub cluster: Option<ClusterConfig>,
    pub sim: SimConfig,
    pub workload: WorkloadConfig,
    pub policy: PolicyConfig,
    pub agent: AgentConfig,
    pub critic: CriticConfig,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
    pub collect: CollectConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seeds: vec![1],
            output_dir: PathBuf::from("out"),
            rho_scope: RhoScope::default(),
            warmup_fraction: 0.05,
            cluster: None,
            sim: SimConfig::default(),
            workload: WorkloadConfig::default(),
            policy: PolicyConfig::default(),
            agent: AgentConfig::default(),
            critic: CriticConfig::default(),
            train: TrainConfig::default(),
            sweep: SweepConfig::default(),
            collect: CollectConfig::default(),
        }
    }
}

/// Recursively overlays `over` onto `base`; tables merge, everything else is replaced.
pub fn deep_merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "desk" => Some(DESK_PRESET),
        _ => None,
    }
}

/// Parses a document and resolves its `include` list (a name or path, or an
/// array of them), later includes and the document itself taking precedence.
fn resolve(text: &str, base_dir: Option<&Path>, depth: usize) -> Result<Value, ExperimentError> {
    if depth > 8 {
        return Err(ExperimentError::Config("include nesting deeper than 8".into()));
    }
    let mut doc: Value = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let includes = match doc.as_table_mut().and_then(|t| t.remove("include")) {
        None => Vec::new(),
        Some(Value::String(s)) => vec![s],
        Some(Value::Array(a)) => a
            .into_iter()
            .map(|v| v.as_str().map(str::to_owned).ok_or_else(|| ExperimentError::Config("include entries must be strings".into())))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(ExperimentError::Config("include must be a string or array".into())),
    };
    let mut merged = Value::Table(Default::default());
    for inc in includes {
        let layer = match builtin(&inc) {
            Some(text) => resolve(text, None, depth + 1)?,
            None => {
                let path = match base_dir {
                    Some(d) => d.join(&inc),
                    None => PathBuf::from(&inc),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ExperimentError::Config(format!("include {}: {e}", path.display())))?;
                resolve(&text, path.parent(), depth + 1)?
            }
        };
        deep_merge(&mut merged, layer);
    }
    deep_merge(&mut merged, doc);
    Ok(merged)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self, ExperimentError> {
        let value = resolve(text, base_dir, 0)?;
        let cfg: ExperimentConfig = value.try_into().map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file, or a built-in preset by name.
    pub fn load(path_or_preset: &str) -> Result<Self, ExperimentError> {
        if let Some(text) = builtin(path_or_preset) {
            return Self::from_toml_str(text, None);
        }
        let path = Path::new(path_or_preset);
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent())
    }

    /// The shipped desk-scale preset.
    pub fn desk() -> Self {
        Self::from_toml_str(DESK_PRESET, None).expect("built-in preset is valid")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn cluster(&self) -> Result<&ClusterConfig, ExperimentError> {
        self.cluster.as_ref().ok_or_else(|| ExperimentError::Config("no [cluster] section".into()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if let Some(c) = &self.cluster {
            c.build()?;
        }
        if !(self.workload.rho_target > 0.0) {
            return bad("workload.rho_target must be positive".into());
        }
        if !(self.workload.horizon > 0.0) || !(self.sim.epoch_interval > 0.0) {
            return bad("horizon and epoch interval must be positive".into());
        }
        if self.workload.ran.urllc_deadline <= 0.0 || self.workload.ran.embb_deadline <= 0.0 {
            return bad("RAN deadlines must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.policy.alpha) {
            return bad("policy.alpha must lie in [0, 1]".into());
        }
        if self.agent.stub.k == 0 {
            return bad("agent.stub.k must be at least 1".into());
        }
        if let Some(p) = &self.workload.trace_path {
            if !p.exists() {
                return bad(format!("trace {} does not exist", p.display()));
            }
        }
        if let Some(p) = &self.critic.model_path {
            if !p.exists() {
                return bad(format!("critic model {} does not exist", p.display()));
            }
        }
        if self.critic.class_weights.iter().any(|w| *w < 0.0) || self.critic.class_weights.iter().sum::<f64>() <= 0.0 {
            return bad("critic.class_weights must be non-negative with a positive sum".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_parses_and_matches_shape() {
        let cfg = ExperimentConfig::desk();
        let c = cfg.cluster().unwrap();
        assert_eq!(c.nodes.len(), 6);
        let count = |cat| c.instances.iter().filter(|s| s.category == cat).count();
        assert_eq!(count(Category::Du), 6);
        assert_eq!(count(Category::CuUp), 6);
        assert_eq!(count(Category::LargeAi), 2);
        assert_eq!(count(Category::SmallAi), 4);
        assert_eq!(cfg.sim.per_hop, 200e-6);
        assert_eq!(cfg.sim.epoch_interval, 5.0);
        assert_eq!(cfg.agent.stub.k, 3);
    }

    #[test]
    fn include_then_override() {
        let cfg = ExperimentConfig::from_toml_str(
            "include = \"desk\"\nseeds = [9]\n[workload]\nrho_target = 1.25\n[sim]\nran_floors = false\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.workload.rho_target, 1.25);
        assert!(!cfg.sim.ran_floors);
        assert_eq!(cfg.sim.per_hop, 200e-6);
        assert_eq!(cfg.cluster().unwrap().nodes.len(), 6);
    }

    #[test]
    fn deep_merge_keeps_untouched_keys() {
        let mut a: Value = toml::from_str("[x]\na = 1\nb = 2\n").unwrap();
        deep_merge(&mut a, toml::from_str("[x]\nb = 3\nc = 4\n").unwrap());
        assert_eq!(a["x"]["a"].as_integer(), Some(1));
        assert_eq!(a["x"]["b"].as_integer(), Some(3));
        assert_eq!(a["x"]["c"].as_integer(), Some(4));
    }

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig::desk();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string(), None).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.label().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("nope".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn missing_files_are_rejected() {
        let err = ExperimentConfig::from_toml_str("include = \"desk\"\n[critic]\nmodel_path = \"/no/such/model\"\n", None);
        assert!(err.is_err());
    }
}
