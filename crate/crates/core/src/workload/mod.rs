//! Request streams: trace ingest, synthetic RAN and AI generation, load
//! scaling and JSON-lines replay.

mod config;
mod scale;
mod trace;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use thiserror::Error;

use crate::model::{Category, CellId, Cluster, Request, RequestClass, StageKind, StageWork};

pub use config::{AiWorkloadConfig, Range, RanWorkloadConfig, TokenDist, WorkloadConfig};
pub use scale::{ai_pool_capacity, measured_rho, scale_to_rho, RhoScope, RHO_TOLERANCE};
pub use trace::{ingest_trace, parse_timestamp, read_requests, read_trace_rows, write_requests, TraceRow};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("request json at line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace file is empty")]
    EmptyTrace,
    #[error("trace has no {0} column")]
    MissingColumn(&'static str),
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error("target load {target} unreachable: {reason}")]
    Unreachable { target: f64, reason: String },
}

fn uniform(rng: &mut impl Rng, r: Range) -> f64 {
    if r.hi > r.lo {
        rng.gen_range(r.lo..r.hi)
    } else {
        r.lo
    }
}

fn poisson_times(rng: &mut impl Rng, rate: f64, horizon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 || horizon <= 0.0 {
        return out;
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = exp.sample(rng);
    while t < horizon {
        out.push(t);
        t += exp.sample(rng);
    }
    out
}

fn draw_tokens(rng: &mut impl Rng, d: TokenDist) -> f64 {
    let ln = LogNormal::new(d.median.max(1.0).ln(), d.sigma.max(0.0)).expect("finite sigma");
    ln.sample(rng).round().clamp(1.0, d.max.max(1.0))
}

/// Synthetic AI arrivals with lognormal prompt and output lengths.
pub fn synth_ai_rows(cfg: &AiWorkloadConfig, horizon: f64, rng: &mut impl Rng) -> Vec<TraceRow> {
    poisson_times(rng, cfg.rate, horizon)
        .into_iter()
        .map(|t| TraceRow {
            timestamp: t,
            prompt_tokens: draw_tokens(rng, cfg.prompt_tokens),
            output_tokens: draw_tokens(rng, cfg.output_tokens),
        })
        .collect()
}

/// Value at quantile `q` by the nearest-rank rule.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q.clamp(0.0, 1.0) * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Maps token rows to AI requests.
///
/// Rows whose output length lies above the configured quantile go to a
/// large-AI service, the rest to a small-AI service. Targets and ingress
/// cells are drawn uniformly.
pub fn rows_to_requests(
    rows: &[TraceRow],
    cluster: &Cluster,
    cfg: &AiWorkloadConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Request>, WorkloadError> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let large: Vec<usize> = cluster.instances_of(Category::LargeAi).map(|s| s.instance_id).collect();
    let small: Vec<usize> = cluster.instances_of(Category::SmallAi).map(|s| s.instance_id).collect();
    let cells = cluster.cells();
    if cells.is_empty() {
        return Err(WorkloadError::Invalid("AI requests need at least one cell for ingress".into()));
    }
    let outputs: Vec<f64> = rows.iter().map(|r| r.output_tokens).collect();
    let threshold = quantile(&outputs, cfg.large_quantile);
    let is_large = |r: &TraceRow| r.output_tokens > threshold;
    let kv_per_token = match cfg.large_kv_per_token {
        Some(k) => k,
        None => {
            let lo: Vec<f64> = rows.iter().filter(|r| is_large(r)).map(|r| r.output_tokens).collect();
            if lo.is_empty() {
                0.0
            } else {
                cfg.large_kv_median / quantile(&lo, 0.5)
            }
        }
    };
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let large_row = is_large(row);
        let (class, pool, flops, deadline) = if large_row {
            (RequestClass::LargeAi, &large, cfg.large_flops_per_token, cfg.large_deadline)
        } else {
            (RequestClass::SmallAi, &small, cfg.small_flops_per_token, cfg.small_deadline)
        };
        if pool.is_empty() {
            return Err(WorkloadError::Invalid(format!("no service instance for {class:?} requests")));
        }
        let target = pool[rng.gen_range(0..pool.len())];
        let cell: CellId = cells[rng.gen_range(0..cells.len())];
        let kv = if large_row { kv_per_token * row.output_tokens } else { cfg.small_kv };
        out.push(Request {
            request_id: i as u64,
            class,
            arrival: row.timestamp,
            deadline_budget: uniform(rng, deadline),
            cell_id: cell,
            target_service: Some(target),
            stages: vec![StageWork {
                stage: StageKind::Ai,
                gpu_work: flops * (row.prompt_tokens + row.output_tokens),
                cpu_work: 0.0,
            }],
            kv_cache: kv,
        });
    }
    Ok(out)
}

/// Poisson RAN traffic per cell with a URLLC/eMBB mix.
pub fn synth_ran(cluster: &Cluster, cfg: &RanWorkloadConfig, horizon: f64, rng: &mut impl Rng) -> Vec<Request> {
    let mut out = Vec::new();
    for cell in cluster.cells() {
        for t in poisson_times(rng, cfg.rate_per_cell, horizon) {
            let urllc = rng.gen::<f64>() < cfg.urllc_fraction;
            out.push(Request {
                request_id: out.len() as u64,
                class: if urllc { RequestClass::RanUrllc } else { RequestClass::RanEmbb },
                arrival: t,
                deadline_budget: if urllc { cfg.urllc_deadline } else { cfg.embb_deadline },
                cell_id: cell,
                target_service: None,
                stages: vec![
                    StageWork { stage: StageKind::Du, gpu_work: uniform(rng, cfg.du_work), cpu_work: 0.0 },
                    StageWork { stage: StageKind::CuUp, gpu_work: 0.0, cpu_work: uniform(rng, cfg.cu_work) },
                ],
                kv_cache: 0.0,
            });
        }
    }
    out
}

/// Sorts by arrival and renumbers request ids from zero.
pub fn merge_streams(mut streams: Vec<Vec<Request>>) -> Vec<Request> {
    let mut all: Vec<Request> = streams.drain(..).flatten().collect();
    all.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
    for (i, r) in all.iter_mut().enumerate() {
        r.request_id = i as u64;
    }
    all
}

/// Unscaled workload: trace or synthetic AI arrivals plus RAN background.
pub fn generate(cluster: &Cluster, cfg: &WorkloadConfig) -> Result<Vec<Request>, WorkloadError> {
    if !(cfg.horizon > 0.0) {
        return Err(WorkloadError::Invalid("horizon must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = match &cfg.trace_path {
        Some(path) => {
            let rows = read_trace_rows(std::fs::File::open(path)?)?;
            rows.into_iter().filter(|r| r.timestamp < cfg.horizon).collect()
        }
        None => synth_ai_rows(&cfg.ai, cfg.horizon, &mut rng),
    };
    let ai = rows_to_requests(&rows, cluster, &cfg.ai, &mut rng)?;
    let ran = synth_ran(cluster, &cfg.ran, cfg.horizon, &mut rng);
    Ok(merge_streams(vec![ai, ran]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_quantile() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
    }

    #[test]
    fn poisson_count_is_plausible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = poisson_times(&mut rng, 50.0, 100.0).len() as f64;
        assert!((n - 5000.0).abs() < 5.0 * 5000f64.sqrt());
    }
}
