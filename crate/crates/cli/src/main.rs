use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use haf_core::experiment::{
    collect_critic_data, load_critic, read_epoch_samples, run_ablation, run_experiment, run_load_sweep, train_critic,
    write_ablation_csv, write_epoch_samples, write_run_outputs, write_sweep_csv, AgentBackend, AgentConfig,
    ExperimentConfig, ExperimentError, NamedAgent, PolicyKind,
};
use log::{error, info, warn};

#[derive(Parser)]
#[command(name = "haf", version, about = "Shared AI/RAN edge cluster simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file, or the name of a built-in preset.
    #[arg(long, global = true, default_value = "desk")]
    config: String,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Critic model file; overrides critic.model_path.
    #[arg(long, global = true)]
    critic: Option<PathBuf>,
    /// Record per-event traces and agent prompts.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy at the configured load.
    Run {
        #[arg(long)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Sweep policies over load levels and write sweep.csv.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        rhos: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<PolicyKind>>,
    },
    /// HAF with and without the critic for the stub and any extra agents.
    Ablate {
        /// Extra agent as NAME=ENDPOINT or NAME=ENDPOINT@MODEL.
        #[arg(long = "agent")]
        agents: Vec<String>,
    },
    /// Epsilon-greedy runs that write epoch_samples.jsonl.
    CollectCriticData {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Train a critic from epoch samples.
    TrainCritic {
        #[arg(long)]
        samples: PathBuf,
        /// Model file; defaults to critic.hafc in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn parse_agent(spec: &str, base: &AgentConfig) -> Result<NamedAgent, ExperimentError> {
    let (name, rest) = spec
        .split_once('=')
        .ok_or_else(|| ExperimentError::Config(format!("agent {spec:?} is not NAME=ENDPOINT[@MODEL]")))?;
    let mut agent = base.clone();
    agent.backend = AgentBackend::Llm;
    match rest.rsplit_once('@') {
        Some((endpoint, model)) => {
            agent.llm.endpoint = endpoint.to_string();
            agent.llm.model = model.to_string();
        }
        None => agent.llm.endpoint = rest.to_string(),
    }
    Ok(NamedAgent { name: name.to_string(), agent })
}

fn require_critic(cfg: &ExperimentConfig) -> Result<haf_core::CriticModel, ExperimentError> {
    load_critic(cfg)?.ok_or_else(|| ExperimentError::Config("this command needs critic.model_path".into()))
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    let mut cfg = ExperimentConfig::load(&cli.common.config)?;
    if let Some(seed) = cli.common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = cli.common.out {
        cfg.output_dir = out;
    }
    if let Some(path) = cli.common.critic {
        cfg.critic.model_path = Some(path);
    }
    cfg.sim.trace |= cli.common.trace;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;

    match cli.command {
        Command::Run { policy, rho } => {
            if let Some(p) = policy {
                cfg.policy.kind = p;
            }
            if let Some(r) = rho {
                cfg.workload.rho_target = r;
            }
            let critic = if cfg.policy.kind.needs_critic() { Some(require_critic(&cfg)?) } else { None };
            for &seed in &cfg.seeds {
                let run = run_experiment(&cfg, seed, critic.as_ref())?;
                let dir = if cfg.seeds.len() == 1 { out.clone() } else { out.join(format!("seed-{seed}")) };
                write_run_outputs(&dir, &run)?;
                let r = &run.report;
                println!(
                    "seed {seed} {}: overall {:.1}%  Q^r {:.1}%  Q^e {:.1}%  large {:.1}%  small {:.1}%  migrations {}/{}",
                    r.policy,
                    100.0 * r.overall,
                    100.0 * r.qr_fulfill,
                    100.0 * r.qe_fulfill,
                    100.0 * r.large_ai.fulfillment,
                    100.0 * r.small_ai.fulfillment,
                    r.migrations_large,
                    r.migrations_total
                );
            }
        }
        Command::Sweep { rhos, policies } => {
            let rhos = rhos.unwrap_or_else(|| cfg.sweep.rhos.clone());
            let policies = policies.unwrap_or_else(|| cfg.sweep.policies.clone());
            let critic = if policies.iter().any(|p| p.needs_critic()) { Some(require_critic(&cfg)?) } else { None };
            let result = run_load_sweep(&cfg, &rhos, &policies, critic.as_ref())?;
            write_sweep_csv(File::create(out.join("sweep.csv"))?, &result.rows)?;
            let mut reports = serde_json::to_vec_pretty(&result.reports)?;
            reports.push(b'\n');
            fs::write(out.join("sweep_reports.json"), reports)?;
            for f in &result.failures {
                warn!("cell rho={} policy={} seed={} failed: {}", f.rho, f.policy, f.seed, f.error);
            }
            for r in &result.rows {
                println!(
                    "rho {:.2} {:<13} Q^r {:.1}%  Q^e {:.1}%  overall {:.1}%  migrations {:.1}",
                    r.rho,
                    r.policy.label(),
                    100.0 * r.qr_fulfill,
                    100.0 * r.qe_fulfill,
                    100.0 * r.overall,
                    r.migrations
                );
            }
        }
        Command::Ablate { agents } => {
            let mut stub = cfg.agent.clone();
            stub.backend = AgentBackend::Stub;
            let mut list = vec![NamedAgent { name: "stub".into(), agent: stub }];
            for spec in &agents {
                list.push(parse_agent(spec, &cfg.agent)?);
            }
            let critic = require_critic(&cfg)?;
            let rows = run_ablation(&cfg, &list, &critic)?;
            write_ablation_csv(File::create(out.join("ablation.csv"))?, &rows)?;
            for r in &rows {
                println!(
                    "{:<16} critic {:.1}% ({:.0} mig)  no critic {:.1}% ({:.0} mig)  gain {:+.1}{}",
                    r.agent,
                    100.0 * r.overall_critic,
                    r.migrations_critic,
                    100.0 * r.overall_nocritic,
                    r.migrations_nocritic,
                    100.0 * r.critic_gain,
                    if r.substituted { "  [stub substituted]" } else { "" }
                );
            }
        }
        Command::CollectCriticData { runs, epsilon } => {
            if let Some(n) = runs {
                cfg.collect.runs = n;
            }
            if let Some(e) = epsilon {
                cfg.collect.epsilon = e;
            }
            let samples = collect_critic_data(&cfg)?;
            let path = out.join("epoch_samples.jsonl");
            write_epoch_samples(BufWriter::new(File::create(&path)?), &samples)?;
            println!("wrote {} samples to {}", samples.len(), path.display());
        }
        Command::TrainCritic { samples, model } => {
            let data = read_epoch_samples(File::open(&samples)?)?;
            let report = train_critic(&cfg, &data)?;
            let path = model.unwrap_or_else(|| out.join("critic.hafc"));
            report.model.save(&path)?;
            let summary = serde_json::json!({
                "model": path,
                "hash": report.model.hash(),
                "train_samples": report.train_samples,
                "val_samples": report.val_samples,
                "untrained_val_mse": report.untrained_val_mse,
                "train_loss": report.train_loss,
                "val_loss": report.val_loss,
            });
            fs::write(out.join("train_report.json"), serde_json::to_vec_pretty(&summary)?)?;
            info!("saved critic {}", report.model.hash());
            println!(
                "trained on {} samples; validation MSE {:.4} (untrained {:.4}); model {}",
                report.train_samples,
                report.val_loss.last().copied().unwrap_or(f64::NAN),
                report.untrained_val_mse,
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
