use crate::model::{Category, InstanceId, RequestId};
use crate::scalar::Scalar;

use super::{AllocError, InstanceLoad};

/// Residual state of one request queued or in service at an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveWork<T> {
    pub request_id: RequestId,
    pub arrival: T,
    pub deadline_budget: T,
    pub resid_gpu: T,
    pub resid_cpu: T,
}

impl<T: Scalar> ActiveWork<T> {
    /// Remaining time to the deadline at `now`; negative once past it.
    pub fn slack(&self, now: T) -> T {
        self.deadline_budget - (now - self.arrival)
    }
}

/// Residual work and urgency of one instance's active requests. Floors are left at zero.
pub fn aggregate_load<T: Scalar>(instance_id: InstanceId, active: &[ActiveWork<T>], now: T, epsilon: T) -> InstanceLoad<T> {
    let mut load = InstanceLoad::idle(instance_id);
    for w in active {
        load.resid_gpu_work += w.resid_gpu;
        load.resid_cpu_work += w.resid_cpu;
        load.urgency += T::one() / w.slack(now).max(epsilon);
    }
    load
}

/// Minimum rate on the dominant resource that clears every pending request
/// of a RAN instance before its deadline, net of downstream overheads.
///
/// `downstream_transport` is the transport delay still ahead of the stage and
/// `downstream_est` the expected processing time of later RAN stages.
pub fn compute_ran_floor<T: Scalar>(
    pending: &[ActiveWork<T>],
    category: Category,
    now: T,
    downstream_transport: T,
    downstream_est: T,
) -> Result<T, AllocError> {
    debug_assert!(category.is_ran(), "floors only apply to RAN functions");
    if pending.is_empty() {
        return Ok(T::zero());
    }
    let gpu = category == Category::Du;
    let mut work = T::zero();
    let mut tightest: Option<(T, RequestId)> = None;
    for w in pending {
        work += if gpu { w.resid_gpu } else { w.resid_cpu };
        let slack = w.slack(now) - downstream_transport - downstream_est;
        if tightest.map_or(true, |(s, _)| slack < s) {
            tightest = Some((slack, w.request_id));
        }
    }
    let (slack, request_id) = tightest.expect("pending is non-empty");
    if slack <= T::zero() {
        return Err(AllocError::InfeasibleFloor { request_id, slack: slack.as_f64() });
    }
    Ok(work / slack)
}

/// Exponentially weighted estimate of downstream CU-UP processing time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownstreamEstimator {
    pub value: f64,
    pub smoothing: f64,
}

impl DownstreamEstimator {
    pub const DEFAULT_SMOOTHING: f64 = 0.2;

    pub fn new(initial: f64) -> Self {
        DownstreamEstimator { value: initial, smoothing: Self::DEFAULT_SMOOTHING }
    }

    pub fn update(&mut self, observed: f64) -> f64 {
        self.value = (1.0 - self.smoothing) * self.value + self.smoothing * observed;
        self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn work(id: RequestId, arrival: f64, budget: f64, g: f64, c: f64) -> ActiveWork<f64> {
        ActiveWork { request_id: id, arrival, deadline_budget: budget, resid_gpu: g, resid_cpu: c }
    }

    #[test]
    fn no_requests_is_idle() {
        let l = aggregate_load::<f64>(3, &[], 1.0, 1e-6);
        assert_eq!((l.resid_gpu_work, l.resid_cpu_work, l.urgency), (0.0, 0.0, 0.0));
    }

    #[test]
    fn urgency_sums_inverse_slack() {
        let l = aggregate_load(0, &[work(1, 0.0, 1.5, 1.0, 0.0), work(2, 0.5, 0.75, 2.0, 0.0)], 1.0, 1e-6);
        assert!((l.urgency - 6.0).abs() < 1e-12);
        assert_eq!(l.resid_gpu_work, 3.0);
    }

    #[test]
    fn overdue_request_is_clamped() {
        let l = aggregate_load(0, &[work(1, 0.0, 1.0, 1.0, 0.0)], 2.0, 1e-3);
        assert!((l.urgency - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn floor_examples() {
        assert_eq!(compute_ran_floor::<f64>(&[], Category::Du, 0.0, 0.0, 0.0).unwrap(), 0.0);
        let f = compute_ran_floor(&[work(1, 0.0, 2e-3, 1e9, 0.0)], Category::Du, 0.0, 0.0, 0.0).unwrap();
        assert!((f - 5e11).abs() < 1e-3);
        let e = compute_ran_floor(&[work(4, 0.0, 1e-3, 1e9, 0.0)], Category::Du, 0.0, 5e-4, 5e-4);
        assert!(matches!(e, Err(AllocError::InfeasibleFloor { request_id: 4, .. })));
    }

    #[test]
    fn cu_up_floor_uses_cpu_work() {
        let f = compute_ran_floor(&[work(1, 0.0, 1e-3, 5e9, 2e-4), work(2, 0.0, 4e-3, 0.0, 2e-4)], Category::CuUp, 0.0, 0.0, 0.0)
            .unwrap();
        assert!((f - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ewma_examples() {
        let mut e = DownstreamEstimator::new(1e-3);
        assert!((e.update(1e-3) - 1e-3).abs() < 1e-18);
        let mut e = DownstreamEstimator::new(1e-3);
        assert!((e.update(2e-3) - 1.2e-3).abs() < 1e-15);
        let mut e = DownstreamEstimator::new(0.0);
        assert_eq!(e.update(0.0), 0.0);
    }
}
