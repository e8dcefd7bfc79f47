use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Inclusive-exclusive uniform range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Lognormal token-count distribution given by its median and log-space sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenDist {
    pub median: f64,
    pub sigma: f64,
    pub max: f64,
}

/// Synthetic RAN-only background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RanWorkloadConfig {
    /// Poisson arrivals per second per cell.
    pub rate_per_cell: f64,
    /// Fraction of URLLC requests; the rest are eMBB.
    pub urllc_fraction: f64,
    pub urllc_deadline: f64,
    pub embb_deadline: f64,
    /// DU GPU work, FLOPs.
    pub du_work: Range,
    /// CU-UP CPU work, core-seconds.
    pub cu_work: Range,
}

impl Default for RanWorkloadConfig {
    fn default() -> Self {
        RanWorkloadConfig {
            rate_per_cell: 3.0,
            urllc_fraction: 0.5,
            urllc_deadline: 1e-3,
            embb_deadline: 4e-3,
            du_work: Range::new(1e9, 3e9),
            cu_work: Range::new(2e-4, 6e-4),
        }
    }
}

/// AI request generation and the token-to-work mapping shared with trace ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AiWorkloadConfig {
    /// Synthetic Poisson arrival rate, requests per second.
    pub rate: f64,
    pub prompt_tokens: TokenDist,
    pub output_tokens: TokenDist,
    /// Requests whose output length exceeds this quantile of the set go to large-AI services.
    pub large_quantile: f64,
    /// GPU work per token, FLOPs.
    pub large_flops_per_token: f64,
    pub small_flops_per_token: f64,
    /// KV per output token for large-AI requests, GB. Calibrated from the data when absent.
    pub large_kv_per_token: Option<f64>,
    /// KV target for the median large-AI request when calibrating, GB.
    pub large_kv_median: f64,
    pub small_kv: f64,
    pub large_deadline: Range,
    pub small_deadline: Range,
}

impl Default for AiWorkloadConfig {
    fn default() -> Self {
        AiWorkloadConfig {
            rate: 12.0,
            prompt_tokens: TokenDist { median: 1000.0, sigma: 1.0, max: 16000.0 },
            output_tokens: TokenDist { median: 200.0, sigma: 0.8, max: 4000.0 },
            large_quantile: 0.5,
            large_flops_per_token: 1.4e11,
            small_flops_per_token: 2.4e10,
            large_kv_per_token: None,
            large_kv_median: 0.5,
            small_kv: 0.02,
            large_deadline: Range::new(1.0, 4.0),
            small_deadline: Range::new(0.5, 2.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub horizon: f64,
    pub rho_target: f64,
    /// CSV trace with timestamp, prompt and output token columns; synthetic AI arrivals otherwise.
    pub trace_path: Option<PathBuf>,
    pub seed: u64,
    pub ai: AiWorkloadConfig,
    pub ran: RanWorkloadConfig,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            horizon: 60.0,
            rho_target: 1.0,
            trace_path: None,
            seed: 1,
            ai: AiWorkloadConfig::default(),
            ran: RanWorkloadConfig::default(),
        }
    }
}
