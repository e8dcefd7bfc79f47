use serde::{Deserialize, Serialize};

use crate::model::Resource;
use crate::scalar::Scalar;

use super::solve::{sqrt_active_set, trim_to_capacity};
use super::{AllocError, InstanceLoad};

/// How a node's capacity above the RAN floors is divided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum AllocRule {
    /// Square-root workload-urgency split with active-set clipping.
    Haf,
    /// Equal residual shares among instances with work.
    EqualShare,
    /// All residual capacity to the instance with the largest urgency-weighted backlog.
    MaxWeight,
    /// Residual capacity cleared in proportion to bids `omega * psi`.
    Market,
    /// Fraction `alpha` of the residual to RAN functions, the rest to AI services.
    AlphaSplit { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeAllocation<T> {
    pub gpu: Vec<T>,
    pub cpu: Vec<T>,
    /// Floors exceeded capacity and were scaled down on this resource.
    pub gpu_overflow: bool,
    pub cpu_overflow: bool,
}

/// Allocates GPU and CPU independently for the instances resident on one node.
///
/// `ran[i]` marks RAN functions (used only by the alpha split). Reconfiguring
/// instances should be left out of `loads` by the caller.
pub fn allocate_node<T: Scalar>(
    loads: &[InstanceLoad<T>],
    ran: &[bool],
    gpu_capacity: T,
    cpu_capacity: T,
    rule: AllocRule,
) -> NodeAllocation<T> {
    let (gpu, gpu_overflow) = allocate_resource(loads, ran, gpu_capacity, Resource::Gpu, rule);
    let (cpu, cpu_overflow) = allocate_resource(loads, ran, cpu_capacity, Resource::Cpu, rule);
    NodeAllocation { gpu, cpu, gpu_overflow, cpu_overflow }
}

fn allocate_resource<T: Scalar>(
    loads: &[InstanceLoad<T>],
    ran: &[bool],
    capacity: T,
    resource: Resource,
    rule: AllocRule,
) -> (Vec<T>, bool) {
    let weights: Vec<T> = loads.iter().map(|l| l.weight(resource)).collect();
    let work: Vec<T> = loads.iter().map(|l| l.work(resource)).collect();
    let mut floors: Vec<T> = loads.iter().map(|l| l.floor(resource)).collect();
    let floor_sum: T = floors.iter().copied().sum();
    let overflow = floor_sum > capacity;
    if overflow {
        let scale = capacity / floor_sum;
        for f in floors.iter_mut() {
            *f *= scale;
        }
    }
    let mut alloc = match rule {
        AllocRule::Haf => match sqrt_active_set(&weights, &floors, capacity) {
            Ok(a) => a,
            // Only reachable through rounding of the scaled floors.
            Err(AllocError::FloorOverflow { .. }) => floors.clone(),
            Err(e) => unreachable!("{e}"),
        },
        _ => {
            let residual = (capacity - floors.iter().copied().sum::<T>()).max(T::zero());
            let share = residual_shares(&weights, &work, ran, residual, rule);
            floors.iter().zip(share).map(|(&f, s)| f + s).collect()
        }
    };
    trim_to_capacity(&mut alloc, &floors, capacity);
    (alloc, overflow)
}

fn residual_shares<T: Scalar>(weights: &[T], work: &[T], ran: &[bool], residual: T, rule: AllocRule) -> Vec<T> {
    let n = weights.len();
    let mut share = vec![T::zero(); n];
    let busy: Vec<usize> = (0..n).filter(|&i| work[i] > T::zero()).collect();
    if busy.is_empty() || residual <= T::zero() {
        return share;
    }
    match rule {
        AllocRule::Haf => unreachable!("handled by the active-set solver"),
        AllocRule::EqualShare => {
            let each = residual / T::of(busy.len() as f64);
            for &i in &busy {
                share[i] = each;
            }
        }
        AllocRule::MaxWeight => {
            let mut best = busy[0];
            for &i in &busy[1..] {
                if weights[i] > weights[best] {
                    best = i;
                }
            }
            share[best] = residual;
        }
        AllocRule::Market => {
            let total: T = busy.iter().map(|&i| weights[i]).sum();
            if total > T::zero() {
                for &i in &busy {
                    share[i] = residual * weights[i] / total;
                }
            } else {
                let each = residual / T::of(busy.len() as f64);
                for &i in &busy {
                    share[i] = each;
                }
            }
        }
        AllocRule::AlphaSplit { alpha } => {
            let alpha = T::of(alpha.clamp(0.0, 1.0));
            let ran_busy: Vec<usize> = busy.iter().copied().filter(|&i| ran[i]).collect();
            let ai_busy: Vec<usize> = busy.iter().copied().filter(|&i| !ran[i]).collect();
            let (ran_part, ai_part) = match (ran_busy.is_empty(), ai_busy.is_empty()) {
                (false, false) => (residual * alpha, residual * (T::one() - alpha)),
                (false, true) => (residual, T::zero()),
                (true, false) => (T::zero(), residual),
                (true, true) => unreachable!("busy is non-empty"),
            };
            for (group, part) in [(&ran_busy, ran_part), (&ai_busy, ai_part)] {
                if !group.is_empty() {
                    let each = part / T::of(group.len() as f64);
                    for &i in group.iter() {
                        share[i] = each;
                    }
                }
            }
        }
    }
    share
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(id: usize, g: f64, c: f64, w: f64, gf: f64, cf: f64) -> InstanceLoad<f64> {
        InstanceLoad { instance_id: id, resid_gpu_work: g, resid_cpu_work: c, urgency: w, gpu_floor: gf, cpu_floor: cf }
    }

    #[test]
    fn empty_node() {
        let a = allocate_node::<f64>(&[], &[], 1.0, 1.0, AllocRule::Haf);
        assert!(a.gpu.is_empty() && a.cpu.is_empty());
    }

    #[test]
    fn cpu_only_node_gets_no_gpu() {
        let loads = [load(0, 0.0, 1e-3, 10.0, 0.0, 0.1), load(1, 0.0, 2e-3, 5.0, 0.0, 0.0)];
        let a = allocate_node(&loads, &[true, true], 100.0, 16.0, AllocRule::Haf);
        assert_eq!(a.gpu, vec![0.0, 0.0]);
        assert!((a.cpu.iter().sum::<f64>() - 16.0).abs() < 1e-9);
    }

    #[test]
    fn overflow_scales_floors() {
        let loads = [load(0, 1.0, 0.0, 1.0, 8.0, 0.0), load(1, 1.0, 0.0, 1.0, 8.0, 0.0)];
        let a = allocate_node(&loads, &[true, true], 10.0, 1.0, AllocRule::Haf);
        assert!(a.gpu_overflow && !a.cpu_overflow);
        assert!((a.gpu[0] - 5.0).abs() < 1e-12 && (a.gpu[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_one_starves_ai_above_floor() {
        let loads = [load(0, 1e9, 0.0, 1e3, 10.0, 0.0), load(1, 1e12, 0.0, 1.0, 0.0, 0.0)];
        let a = allocate_node(&loads, &[true, false], 100.0, 1.0, AllocRule::AlphaSplit { alpha: 1.0 });
        assert_eq!(a.gpu[1], 0.0);
        assert!((a.gpu[0] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_split_lone_class_takes_all() {
        let loads = [load(0, 0.0, 0.0, 0.0, 0.0, 0.0), load(1, 1e12, 0.0, 1.0, 0.0, 0.0)];
        let a = allocate_node(&loads, &[true, false], 100.0, 1.0, AllocRule::AlphaSplit { alpha: 0.7 });
        assert_eq!(a.gpu, vec![0.0, 100.0]);
    }

    #[test]
    fn baseline_rules_respect_floors() {
        let loads = [load(0, 1e9, 0.0, 1e2, 30.0, 0.0), load(1, 1e12, 0.0, 1.0, 0.0, 0.0), load(2, 1e11, 0.0, 1.0, 0.0, 0.0)];
        for rule in [AllocRule::EqualShare, AllocRule::MaxWeight, AllocRule::Market, AllocRule::AlphaSplit { alpha: 0.5 }] {
            let a = allocate_node(&loads, &[true, false, false], 100.0, 1.0, rule);
            assert!(a.gpu[0] >= 30.0, "{rule:?}");
            assert!(a.gpu.iter().sum::<f64>() <= 100.0 + 1e-12, "{rule:?}");
        }
        let a = allocate_node(&loads, &[true, false, false], 100.0, 1.0, AllocRule::MaxWeight);
        assert_eq!(a.gpu, vec![30.0, 70.0, 0.0]);
        let a = allocate_node(&loads, &[true, false, false], 90.0, 1.0, AllocRule::EqualShare);
        assert_eq!(a.gpu, vec![50.0, 20.0, 20.0]);
    }
}
