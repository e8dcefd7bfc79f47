//! Slow-timescale placement: candidate generation, the agent interface, and
//! baseline controllers.

mod action;
mod agent;
mod baselines;
mod candidates;
mod controllers;
mod prompt;
mod snapshot;
mod stub;

pub use action::MigrationAction;
pub use agent::{llm_shortlist, Agent, AgentError, LlmClient, LlmClientConfig, Proposal};
pub use baselines::{
    alpha_split_alloc, game_theory_step, lyapunov_step, BestResponse, GameConfig, LyapunovConfig, RoundRobinDispatcher,
};
pub use candidates::{candidate_bound, generate_candidates, movable_count};
pub use controllers::{AgentExchange, GameController, HafController, LyapunovController, BASELINE_MOVABLE};
pub use prompt::{build_prompt, parse_shortlist, SHORTLIST_FENCE};
pub use snapshot::{EpochSnapshot, InstanceState, NodeState};
pub use stub::{stub_score, stub_shortlist, StubConfig};
