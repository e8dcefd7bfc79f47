#![allow(dead_code)]

use haf_core::model::{
    Category, CellId, Cluster, InstanceSpec, NodeSpec, Placement, Request, RequestClass, StageKind, StageWork,
};
use rand::Rng;

/// `sum w_i / x_i`, with `0/0` read as zero.
pub fn objective(weights: &[f64], x: &[f64]) -> f64 {
    weights.iter().zip(x).map(|(&w, &x)| if w == 0.0 { 0.0 } else { w / x }).sum()
}

/// Projection of `y` onto `{x >= f, sum x = c}` in the metric `diag(h)`.
fn project(y: &[f64], h: &[f64], f: &[f64], c: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> { y.iter().zip(h).zip(f).map(|((&y, &h), &f)| (y - nu / h).max(f)).collect() };
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    let (mut lo, mut hi) = (-1.0, 1.0);
    while sum(&at(lo)) < c {
        lo *= 2.0;
    }
    while sum(&at(hi)) > c {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(&at(mid)) > c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    at(0.5 * (lo + hi))
}

/// Diagonally preconditioned projected gradient with Armijo backtracking for
/// `min sum w/x  s.t.  x >= f, sum x <= c` (all `w > 0`, so capacity binds).
pub fn projected_gradient(weights: &[f64], floors: &[f64], capacity: f64) -> Vec<f64> {
    let n = weights.len();
    let wmax = weights.iter().cloned().fold(0.0, f64::max);
    let w: Vec<f64> = weights.iter().map(|v| v / wmax).collect();
    let f: Vec<f64> = floors.iter().map(|v| v / capacity).collect();
    let spare = (1.0 - f.iter().sum::<f64>()) / n as f64;
    let mut x: Vec<f64> = f.iter().map(|v| v + spare).collect();
    let obj = |x: &[f64]| objective(&w, x);
    for _ in 0..2000 {
        let g: Vec<f64> = w.iter().zip(&x).map(|(w, x)| -w / (x * x)).collect();
        let h: Vec<f64> = w.iter().zip(&x).map(|(w, x)| (2.0 * w / (x * x * x)).max(1e-300)).collect();
        let fx = obj(&x);
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let y: Vec<f64> = (0..n).map(|i| x[i] - step * g[i] / h[i]).collect();
            let z = project(&y, &h, &f, 1.0);
            if z.iter().any(|v| *v <= 0.0) {
                step *= 0.5;
                continue;
            }
            let decrease: f64 = (0..n).map(|i| g[i] * (z[i] - x[i])).sum();
            let fz = obj(&z);
            if fz <= fx + 1e-4 * decrease {
                let delta = (0..n).map(|i| (z[i] - x[i]).abs()).fold(0.0, f64::max);
                x = z;
                moved = delta > 1e-15;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x.iter().map(|v| v * capacity).collect()
}

/// Random per-node problem: 2..=8 instances, log-uniform weights over six
/// decades, floors summing to at most 90% of capacity.
pub fn random_problem(rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>, f64) {
    let n = rng.gen_range(2..=8);
    let capacity = 10f64.powf(rng.gen_range(0.0..15.0));
    let weights: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(0.0..6.0))).collect();
    let raw: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { rng.gen::<f64>() } else { 0.0 }).collect();
    let total: f64 = raw.iter().sum();
    let share = rng.gen_range(0.0..0.9);
    let floors = raw.iter().map(|r| if total > 0.0 { r / total * share * capacity } else { 0.0 }).collect();
    (weights, floors, capacity)
}

pub fn node(id: usize, gpu: f64, cpu: f64, vram: f64) -> NodeSpec {
    NodeSpec { node_id: id, gpu_capacity: gpu, cpu_capacity: cpu, vram_capacity: vram, name: String::new() }
}

pub fn instance(id: usize, category: Category, weight: f64, reconfig: f64, cell: Option<CellId>) -> InstanceSpec {
    InstanceSpec { instance_id: id, category, weight_footprint: weight, reconfig_delay: reconfig, cell_id: cell }
}

/// Two nodes, one cell (DU 0, CU-UP 1), one large-AI (2) and one small-AI (3) service.
pub fn two_node_cluster() -> (Cluster, Placement) {
    let cluster = Cluster::new(
        vec![node(0, 100e12, 16.0, 80.0), node(1, 100e12, 16.0, 80.0)],
        vec![
            instance(0, Category::Du, 1.0, 0.05, Some(0)),
            instance(1, Category::CuUp, 0.0, 0.05, Some(0)),
            instance(2, Category::LargeAi, 28.0, 8.0, None),
            instance(3, Category::SmallAi, 0.5, 0.5, None),
        ],
    )
    .unwrap();
    let placement = Placement::new(&cluster, vec![0, 0, 0, 0]).unwrap();
    (cluster, placement)
}

pub fn ran_request(id: u64, arrival: f64, cell: CellId, du_flops: f64, cu_core_s: f64, budget: f64) -> Request {
    Request {
        request_id: id,
        class: if budget <= 1e-3 { RequestClass::RanUrllc } else { RequestClass::RanEmbb },
        arrival,
        deadline_budget: budget,
        cell_id: cell,
        target_service: None,
        stages: vec![
            StageWork { stage: StageKind::Du, gpu_work: du_flops, cpu_work: 0.0 },
            StageWork { stage: StageKind::CuUp, gpu_work: 0.0, cpu_work: cu_core_s },
        ],
        kv_cache: 0.0,
    }
}

pub fn ai_request(id: u64, class: RequestClass, arrival: f64, target: usize, flops: f64, budget: f64, kv: f64) -> Request {
    Request {
        request_id: id,
        class,
        arrival,
        deadline_budget: budget,
        cell_id: 0,
        target_service: Some(target),
        stages: vec![StageWork { stage: StageKind::Ai, gpu_work: flops, cpu_work: 0.0 }],
        kv_cache: kv,
    }
}

/// Largest relative gap between the analytic loss gradient and central
/// differences, over every parameter. Parameters whose two estimates are both
/// below `floor` in magnitude are compared absolutely against `floor`.
pub fn gradient_check(mlp: &haf_core::Mlp, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
    let (_, grad) = mlp.gradients(&xr, &yr);
    let analytic: Vec<f64> = grad.parts().iter().flat_map(|p| p.iter().copied()).collect();
    let h = 1e-6;
    let floor = 1e-7;
    let mut worst = 0.0f64;
    let mut probe = mlp.clone();
    let mut k = 0;
    for part in 0..4 {
        for i in 0..probe.params_mut()[part].len() {
            let orig = probe.params_mut()[part][i];
            probe.params_mut()[part][i] = orig + h;
            let up = probe.mse(xs, ys);
            probe.params_mut()[part][i] = orig - h;
            let down = probe.mse(xs, ys);
            probe.params_mut()[part][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            k += 1;
            let scale = a.abs().max(numeric.abs()).max(floor);
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}
