use serde::{Deserialize, Serialize};

use crate::model::{Category, Request, RequestClass};
use crate::sim::{window_fulfillment, SimOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ClassStats {
    pub total: usize,
    pub met: usize,
    /// Met over total; 1.0 for an empty class.
    pub fulfillment: f64,
}

impl ClassStats {
    fn from_counts(met: usize, total: usize) -> Self {
        let fulfillment = if total == 0 { 1.0 } else { met as f64 / total as f64 };
        ClassStats { total, met, fulfillment }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub timestamp: f64,
    pub committed: String,
    pub migrated: bool,
    pub rejection: Option<String>,
    /// Large-AI, small-AI and RAN fulfillment of arrivals in this epoch.
    pub fulfillment: [f64; 3],
    pub mean_gpu_util: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: String,
    pub seed: u64,
    pub rho_target: f64,
    /// Offered AI load over the capacity it was scaled against.
    pub rho_realized: f64,
    /// Offered AI load over every node's GPU capacity.
    pub rho_cluster: f64,
    pub requests: usize,
    pub overall: f64,
    pub qr_fulfill: f64,
    pub qe_fulfill: f64,
    pub large_ai: ClassStats,
    pub small_ai: ClassStats,
    pub urllc: ClassStats,
    pub embb: ClassStats,
    /// Classes with no requests, reported as vacuously fulfilled.
    pub empty_classes: Vec<String>,
    pub migrations_large: usize,
    pub migrations_total: usize,
    pub epochs: usize,
    pub rejected_actions: usize,
    pub degraded_epochs: usize,
    pub unfinished: usize,
    pub infeasible_floor_requests: usize,
    pub floor_overflow_events: usize,
    pub violations: usize,
    pub max_conservation_error: f64,
    pub critic_hash: Option<String>,
    pub epoch_series: Vec<EpochMetrics>,
}

/// Inputs to a report besides the simulation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportContext {
    pub policy: String,
    pub seed: u64,
    pub rho_target: f64,
    pub rho_realized: f64,
    pub rho_cluster: f64,
    pub epoch_interval: f64,
    pub degraded_epochs: usize,
    pub critic_hash: Option<String>,
}

pub fn compute_report(requests: &[Request], outcome: &SimOutcome, ctx: ReportContext) -> MetricsReport {
    let mut met = [0usize; 4];
    let mut total = [0usize; 4];
    let slot = |c: RequestClass| match c {
        RequestClass::LargeAi => 0,
        RequestClass::SmallAi => 1,
        RequestClass::RanUrllc => 2,
        RequestClass::RanEmbb => 3,
    };
    for (r, &ok) in requests.iter().zip(&outcome.request_met) {
        total[slot(r.class)] += 1;
        met[slot(r.class)] += usize::from(ok);
    }
    let stats: Vec<ClassStats> = (0..4).map(|i| ClassStats::from_counts(met[i], total[i])).collect();
    let names = ["large_ai", "small_ai", "urllc", "embb"];
    let empty_classes = (0..4).filter(|&i| total[i] == 0).map(|i| names[i].to_string()).collect();
    let ratio = |m: usize, t: usize| if t == 0 { 1.0 } else { m as f64 / t as f64 };
    let epoch_series = outcome
        .epochs
        .iter()
        .map(|e| {
            let util = &e.snapshot.nodes;
            EpochMetrics {
                epoch: e.epoch,
                timestamp: e.timestamp,
                committed: e.committed.to_string(),
                migrated: e.committed.is_move(),
                rejection: e.rejection.clone(),
                fulfillment: window_fulfillment(
                    requests,
                    &outcome.request_met,
                    e.timestamp,
                    e.timestamp + ctx.epoch_interval,
                ),
                mean_gpu_util: util.iter().map(|n| n.gpu_util).sum::<f64>() / util.len().max(1) as f64,
            }
        })
        .collect();
    MetricsReport {
        policy: ctx.policy,
        seed: ctx.seed,
        rho_target: ctx.rho_target,
        rho_realized: ctx.rho_realized,
        rho_cluster: ctx.rho_cluster,
        requests: requests.len(),
        overall: ratio(met.iter().sum(), total.iter().sum()),
        qr_fulfill: ratio(met[2] + met[3], total[2] + total[3]),
        qe_fulfill: ratio(met[0] + met[1], total[0] + total[1]),
        large_ai: stats[0],
        small_ai: stats[1],
        urllc: stats[2],
        embb: stats[3],
        empty_classes,
        migrations_large: outcome.migrations.iter().filter(|m| m.category == Category::LargeAi).count(),
        migrations_total: outcome.migrations.len(),
        epochs: outcome.epochs.len(),
        rejected_actions: outcome.rejected_actions,
        degraded_epochs: ctx.degraded_epochs,
        unfinished: outcome.unfinished.len(),
        infeasible_floor_requests: outcome.infeasible_floor_requests,
        floor_overflow_events: outcome.floor_overflow_events,
        violations: outcome.violations.len(),
        max_conservation_error: outcome.max_conservation_error,
        critic_hash: ctx.critic_hash,
        epoch_series,
    }
}

/// Median of a non-empty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn empty_outcome_is_vacuous() {
        let ctx = ReportContext {
            policy: "static".into(),
            seed: 1,
            rho_target: 1.0,
            rho_realized: 0.0,
            rho_cluster: 0.0,
            epoch_interval: 5.0,
            degraded_epochs: 0,
            critic_hash: None,
        };
        let r = compute_report(&[], &SimOutcome::default(), ctx);
        assert_eq!(r.overall, 1.0);
        assert_eq!(r.qe_fulfill, 1.0);
        assert_eq!(r.empty_classes.len(), 4);
        assert_eq!((r.migrations_large, r.migrations_total), (0, 0));
    }
}
