use crate::model::{InstanceId, Resource};
use crate::scalar::Scalar;

use super::AllocError;

/// Per-instance load on one node, as seen by the fast-timescale solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceLoad<T> {
    pub instance_id: InstanceId,
    /// Residual GPU work, FLOPs.
    pub resid_gpu_work: T,
    /// Residual CPU work, core-seconds.
    pub resid_cpu_work: T,
    /// Aggregate urgency, 1/s.
    pub urgency: T,
    /// FLOPs/s.
    pub gpu_floor: T,
    /// Cores.
    pub cpu_floor: T,
}

impl<T: Scalar> InstanceLoad<T> {
    pub fn idle(instance_id: InstanceId) -> Self {
        InstanceLoad {
            instance_id,
            resid_gpu_work: T::zero(),
            resid_cpu_work: T::zero(),
            urgency: T::zero(),
            gpu_floor: T::zero(),
            cpu_floor: T::zero(),
        }
    }

    pub fn work(&self, resource: Resource) -> T {
        match resource {
            Resource::Gpu => self.resid_gpu_work,
            Resource::Cpu => self.resid_cpu_work,
        }
    }

    pub fn floor(&self, resource: Resource) -> T {
        match resource {
            Resource::Gpu => self.gpu_floor,
            Resource::Cpu => self.cpu_floor,
        }
    }

    /// Urgency-weighted backlog on `resource`.
    pub fn weight(&self, resource: Resource) -> T {
        self.urgency * self.work(resource)
    }
}

/// Square-root active-set allocation of one resource on one node.
///
/// Returns one allocation per entry of `loads`, in order.
pub fn solve_resource<T: Scalar>(
    loads: &[InstanceLoad<T>],
    capacity: T,
    resource: Resource,
) -> Result<Vec<T>, AllocError> {
    let weights: Vec<T> = loads.iter().map(|l| l.weight(resource)).collect();
    let floors: Vec<T> = loads.iter().map(|l| l.floor(resource)).collect();
    sqrt_active_set(&weights, &floors, capacity)
}

/// Minimizes `sum w_i / x_i` subject to `x_i >= f_i` and `sum x_i <= capacity`.
///
/// Unclipped instances share the capacity left after the clipped ones in
/// proportion to `sqrt(w_i)`. Violators are clipped to their floor each round;
/// the water level only falls, so a clipped instance never needs releasing.
pub fn sqrt_active_set<T: Scalar>(weights: &[T], floors: &[T], capacity: T) -> Result<Vec<T>, AllocError> {
    debug_assert_eq!(weights.len(), floors.len());
    let floor_sum: T = floors.iter().copied().sum();
    if floor_sum > capacity {
        return Err(AllocError::FloorOverflow { floor_sum: floor_sum.as_f64(), capacity: capacity.as_f64() });
    }
    let roots: Vec<T> = weights.iter().map(|w| w.max(T::zero()).sqrt()).collect();
    let n = weights.len();
    let mut clipped = vec![false; n];
    let mut alloc = vec![T::zero(); n];
    for _ in 0..=n {
        let fixed: T = (0..n).filter(|&i| clipped[i]).map(|i| floors[i]).sum();
        let residual = (capacity - fixed).max(T::zero());
        let denom: T = (0..n).filter(|&i| !clipped[i]).map(|i| roots[i]).sum();
        let mut new_clip = false;
        for i in 0..n {
            if clipped[i] {
                alloc[i] = floors[i];
                continue;
            }
            alloc[i] = if denom > T::zero() { residual * roots[i] / denom } else { T::zero() };
            if alloc[i] < floors[i] {
                clipped[i] = true;
                new_clip = true;
            }
        }
        if !new_clip {
            break;
        }
    }
    for i in 0..n {
        if clipped[i] {
            alloc[i] = floors[i];
        }
    }
    trim_to_capacity(&mut alloc, floors, capacity);
    Ok(alloc)
}

/// Absorbs floating-point overshoot so that the sum never exceeds capacity.
pub(crate) fn trim_to_capacity<T: Scalar>(alloc: &mut [T], floors: &[T], capacity: T) {
    let total: T = alloc.iter().copied().sum();
    if total <= capacity {
        return;
    }
    let excess = total - capacity;
    let slack: T = alloc.iter().zip(floors).map(|(&a, &f)| (a - f).max(T::zero())).sum();
    if slack > T::zero() {
        for (a, &f) in alloc.iter_mut().zip(floors) {
            let s = (*a - f).max(T::zero());
            *a -= excess * s / slack;
            if *a < f {
                *a = f;
            }
        }
    }
    let total: T = alloc.iter().copied().sum();
    if total > capacity {
        let scale = capacity / total;
        for a in alloc.iter_mut() {
            *a *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn single_instance_takes_everything() {
        let a = sqrt_active_set(&[7.0_f64], &[0.0], 10.0).unwrap();
        assert!(close(a[0], 10.0));
    }

    #[test]
    fn two_to_one_split() {
        let a = sqrt_active_set(&[4.0_f64, 1.0], &[0.0, 0.0], 3.0).unwrap();
        assert!(close(a[0], 2.0) && close(a[1], 1.0));
    }

    #[test]
    fn one_round_of_clipping() {
        let a = sqrt_active_set(&[1.0_f64, 1.0], &[2.5, 0.0], 4.0).unwrap();
        assert!(close(a[0], 2.5) && close(a[1], 1.5));
    }

    #[test]
    fn zero_weight_gets_only_floor() {
        let a = sqrt_active_set(&[0.0_f64, 0.0, 9.0], &[1.0, 0.0, 0.0], 4.0).unwrap();
        assert!(close(a[0], 1.0) && a[1] == 0.0 && close(a[2], 3.0));
        let a = sqrt_active_set(&[0.0_f64, 0.0], &[1.0, 0.0], 4.0).unwrap();
        assert_eq!(a, vec![1.0, 0.0]);
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(
            sqrt_active_set(&[1.0_f64, 1.0], &[3.0, 2.0], 4.0),
            Err(AllocError::FloorOverflow { .. })
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let a = sqrt_active_set(&[4.0_f32, 1.0], &[0.0, 0.0], 3.0).unwrap();
        assert!((a[0] - 2.0).abs() < 1e-6 && (a[1] - 1.0).abs() < 1e-6);
    }
}
