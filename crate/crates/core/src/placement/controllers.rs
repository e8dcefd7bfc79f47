use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::critic::{select, CriticModel};
use crate::model::Category;
use crate::sim::{EpochContext, EpochDecision, EpochPolicy};

use super::agent::Agent;
use super::baselines::{game_theory_step, lyapunov_step, GameConfig, LyapunovConfig};
use super::MigrationAction;

/// Every category except large-AI services.
pub const BASELINE_MOVABLE: [Category; 3] = [Category::Du, Category::CuUp, Category::SmallAi];

/// Prompt and reply of one agent exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentExchange {
    pub epoch: usize,
    pub prompt: String,
    pub reply: Option<String>,
    pub degraded: bool,
}

/// Agent shortlist, optionally filtered by a frozen critic.
///
/// With a critic, the critic scores the shortlist plus the no-migration
/// option and commits the best. Without one, the first shortlist entry is
/// committed. `explore` turns on epsilon-greedy choice for data collection.
pub struct HafController {
    pub agent: Agent,
    pub critic: Option<CriticModel<f64>>,
    pub class_weights: [f64; 3],
    pub movable: Vec<Category>,
    pub explore: Option<(f64, ChaCha8Rng)>,
    pub archive_prompts: bool,
    pub exchanges: Vec<AgentExchange>,
    pub degraded_epochs: usize,
}

impl HafController {
    pub fn new(agent: Agent, critic: Option<CriticModel<f64>>, class_weights: [f64; 3]) -> Self {
        HafController {
            agent,
            critic,
            class_weights,
            movable: Category::ALL.to_vec(),
            explore: None,
            archive_prompts: false,
            exchanges: Vec::new(),
            degraded_epochs: 0,
        }
    }

    pub fn with_exploration(mut self, epsilon: f64, seed: u64) -> Self {
        self.explore = Some((epsilon, ChaCha8Rng::seed_from_u64(seed)));
        self
    }

    pub fn with_movable(mut self, movable: Vec<Category>) -> Self {
        self.movable = movable;
        self
    }
}

impl EpochPolicy for HafController {
    fn movable(&self) -> Vec<Category> {
        self.movable.clone()
    }

    fn decide(&mut self, ctx: &EpochContext<'_>) -> EpochDecision {
        let proposal = self.agent.propose(ctx.cluster, ctx.snapshot, ctx.candidates);
        if proposal.degraded {
            self.degraded_epochs += 1;
        }
        if self.archive_prompts {
            if let Some(prompt) = &proposal.prompt {
                self.exchanges.push(AgentExchange {
                    epoch: ctx.snapshot.epoch,
                    prompt: prompt.clone(),
                    reply: proposal.reply.clone(),
                    degraded: proposal.degraded,
                });
            }
        }
        let shortlist = proposal.shortlist;
        let mut options = shortlist.clone();
        if !options.contains(&MigrationAction::NoOp) {
            options.push(MigrationAction::NoOp);
        }
        if let Some((epsilon, rng)) = self.explore.as_mut() {
            if rng.gen::<f64>() < *epsilon {
                let pick = options[rng.gen_range(0..options.len())];
                return EpochDecision { action: Some(pick), shortlist, note: Some("explore".into()) };
            }
        }
        let (action, note) = match &self.critic {
            Some(model) => match select(&options, ctx.snapshot, model, self.class_weights) {
                Ok((a, forecasts)) => {
                    let scores: Vec<String> =
                        forecasts.iter().map(|f| format!("{:.3}", f.weighted(self.class_weights))).collect();
                    (a, Some(format!("critic scores [{}]", scores.join(", "))))
                }
                Err(e) => (shortlist[0], Some(format!("critic unavailable: {e}"))),
            },
            None => (shortlist.first().copied().unwrap_or(MigrationAction::NoOp), None),
        };
        EpochDecision { action: Some(action), shortlist, note }
    }
}

pub struct LyapunovController {
    pub cfg: LyapunovConfig,
    pub movable: Vec<Category>,
}

impl EpochPolicy for LyapunovController {
    fn movable(&self) -> Vec<Category> {
        self.movable.clone()
    }

    fn decide(&mut self, ctx: &EpochContext<'_>) -> EpochDecision {
        EpochDecision::commit(lyapunov_step(ctx.snapshot, ctx.candidates, &self.cfg))
    }
}

pub struct GameController {
    pub cfg: GameConfig,
    pub movable: Vec<Category>,
}

impl EpochPolicy for GameController {
    fn movable(&self) -> Vec<Category> {
        self.movable.clone()
    }

    fn decide(&mut self, ctx: &EpochContext<'_>) -> EpochDecision {
        let br = game_theory_step(ctx.snapshot, ctx.candidates, &self.cfg);
        let note = (!br.converged).then(|| format!("best response capped after {} rounds", br.rounds));
        EpochDecision { action: Some(br.action), shortlist: Vec::new(), note }
    }
}
