mod common;

use common::{gradient_check, two_node_cluster};
use haf_core::critic::{
    encode_features, feature_len, select, select_index, train, CriticError, CriticForecast, CriticModel, TrainConfig,
    TrainingSample, ACTION_FEATURES, DEFAULT_CLASS_WEIGHTS,
};
use haf_core::model::Category;
use haf_core::placement::{generate_candidates, MigrationAction};
use haf_core::sim::{SimConfig, Simulation};
use haf_core::Mlp;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let ys = (0..n).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
    (xs, ys)
}

fn small_cfg() -> TrainConfig {
    TrainConfig { hidden: 16, epochs: 40, min_samples: 20, learning_rate: 3e-3, ..Default::default() }
}

#[test]
fn gradients_match_finite_differences() {
    let (xs, ys) = fixture(5, 7, 1);
    let mlp = Mlp::init(7, 6, 3, &mut ChaCha8Rng::seed_from_u64(2));
    let err = gradient_check(&mlp, &xs, &ys);
    assert!(err < 1e-4, "relative gradient error {err}");
}

#[test]
fn f32_network_agrees_with_f64() {
    let mlp = Mlp::init(5, 4, 3, &mut ChaCha8Rng::seed_from_u64(3));
    let narrow = haf_core::MlpF32 {
        input: 5,
        hidden: 4,
        output: 3,
        w1: mlp.w1.iter().map(|&v| v as f32).collect(),
        b1: mlp.b1.iter().map(|&v| v as f32).collect(),
        w2: mlp.w2.iter().map(|&v| v as f32).collect(),
        b2: mlp.b2.iter().map(|&v| v as f32).collect(),
    };
    let x = [0.1, -0.2, 0.3, 0.5, -0.7];
    let xf: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    for (a, b) in mlp.forward(&x).iter().zip(narrow.forward(&xf)) {
        assert!((a - b as f64).abs() < 1e-5);
    }
}

#[test]
fn constant_labels_are_learned() {
    let (xs, _) = fixture(200, 6, 4);
    let samples: Vec<TrainingSample> =
        xs.into_iter().map(|features| TrainingSample { features, label: [0.7, 0.2, 0.95] }).collect();
    let cfg = TrainConfig { epochs: 200, ..small_cfg() };
    let report = train::<f64>(&samples, 1, &cfg).unwrap();
    assert!(*report.val_loss.last().unwrap() < 1e-3, "{:?}", report.val_loss.last());
    let f = report.model.forecast(&samples[0].features).unwrap();
    assert!((f.r_large - 0.7).abs() < 0.05 && (f.r_ran - 0.95).abs() < 0.05);
}

#[test]
fn separable_set_trains_monotonically() {
    let (xs, _) = fixture(300, 6, 5);
    let samples: Vec<TrainingSample> = xs
        .into_iter()
        .map(|features| {
            let l = if features[0] > 0.0 { 1.0 } else { 0.0 };
            TrainingSample { label: [l, 1.0 - l, l], features }
        })
        .collect();
    let report = train::<f64>(&samples, 1, &small_cfg()).unwrap();
    for w in report.train_loss[..10].windows(2) {
        assert!(w[1] <= w[0], "{:?}", &report.train_loss[..10]);
    }
    assert!(*report.val_loss.last().unwrap() < 0.5 * report.untrained_val_mse);
}

#[test]
fn training_is_generic_over_precision() {
    let (xs, _) = fixture(100, 4, 6);
    let samples: Vec<TrainingSample> = xs
        .into_iter()
        .map(|features| TrainingSample { label: [0.5 + 0.4 * features[1].signum(), 0.5, 0.5], features })
        .collect();
    let report = train::<f32>(&samples, 1, &small_cfg()).unwrap();
    assert!(report.train_loss.last().unwrap() < &report.untrained_train_mse);
}

#[test]
fn rejects_bad_training_sets() {
    let few = vec![TrainingSample { features: vec![0.0; 3], label: [0.5; 3] }; 5];
    assert!(matches!(train::<f64>(&few, 1, &small_cfg()), Err(CriticError::TooFewSamples { .. })));
    let mut mixed = vec![TrainingSample { features: vec![0.0; 3], label: [0.5; 3] }; 40];
    mixed[7].features.push(1.0);
    assert!(matches!(train::<f64>(&mixed, 1, &small_cfg()), Err(CriticError::ShapeMismatch { .. })));
    let mut out_of_range = vec![TrainingSample { features: vec![0.0; 3], label: [0.5; 3] }; 40];
    out_of_range[3].label[1] = 1.5;
    assert!(train::<f64>(&out_of_range, 1, &small_cfg()).is_err());
}

#[test]
fn model_file_round_trips() {
    let (xs, ys) = fixture(30, 5, 8);
    let samples: Vec<TrainingSample> =
        xs.iter().zip(&ys).map(|(x, y)| TrainingSample { features: x.clone(), label: [y[0], y[1], y[2]] }).collect();
    let model = train::<f64>(&samples, 1, &small_cfg()).unwrap().model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("critic.hafc");
    model.save(&path).unwrap();
    let back = CriticModel::<f64>::load(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.hash(), model.hash());
    assert_eq!(back.forecast(&xs[0]).unwrap(), model.forecast(&xs[0]).unwrap());
    let mut bytes = model.to_bytes();
    bytes.pop();
    assert!(matches!(CriticModel::<f64>::from_bytes(&bytes), Err(CriticError::Format(_))));
    assert!(matches!(CriticModel::<f64>::from_bytes(b"nope"), Err(CriticError::Format(_))));
}

#[test]
fn wrong_feature_length_is_an_error() {
    let model = CriticModel { nodes: 1, mean: vec![0.0; 4], std: vec![1.0; 4], mlp: Mlp::zeros(4, 2, 3) };
    assert!(matches!(model.forecast(&[0.0; 5]), Err(CriticError::ShapeMismatch { expected: 4, found: 5 })));
    let f = model.forecast(&[0.0; 4]).unwrap();
    assert_eq!(f, CriticForecast { r_large: 0.5, r_small: 0.5, r_ran: 0.5 });
}

#[test]
fn features_have_fixed_layout() {
    assert_eq!(feature_len(6), 42);
    let (cluster, placement) = two_node_cluster();
    let snap = Simulation::new(&cluster, placement.clone(), &[], SimConfig::default()).unwrap().snapshot(1);
    let noop = encode_features(&snap, &MigrationAction::NoOp);
    assert_eq!(noop.len(), feature_len(2));
    assert!(noop[noop.len() - ACTION_FEATURES..].iter().all(|&v| v == 0.0));
    assert_eq!(noop, encode_features(&snap, &MigrationAction::NoOp));
    let cands = generate_candidates(&cluster, &placement, &Category::ALL);
    let mv = encode_features(&snap, &cands[1]);
    let block = &mv[mv.len() - ACTION_FEATURES..];
    assert_eq!(block[0], 1.0);
    assert_eq!(block[1..5].iter().sum::<f64>(), 1.0);
    assert_eq!(mv[..mv.len() - ACTION_FEATURES], noop[..noop.len() - ACTION_FEATURES]);
}

#[test]
fn select_scores_every_option() {
    let (cluster, placement) = two_node_cluster();
    let snap = Simulation::new(&cluster, placement.clone(), &[], SimConfig::default()).unwrap().snapshot(1);
    let cands = generate_candidates(&cluster, &placement, &Category::ALL);
    let dim = feature_len(2);
    // A network that only reads the is-move flag and predicts lower
    // fulfillment for moves prefers NoOp.
    let mut mlp = Mlp::zeros(dim, 1, 3);
    mlp.w1[dim - ACTION_FEATURES] = 1.0;
    mlp.w2 = vec![-5.0, -5.0, -5.0];
    let model = CriticModel { nodes: 2, mean: vec![0.0; dim], std: vec![1.0; dim], mlp };
    let options = [cands[1], cands[2], MigrationAction::NoOp];
    let (best, forecasts) = select(&options, &snap, &model, DEFAULT_CLASS_WEIGHTS).unwrap();
    assert_eq!(best, MigrationAction::NoOp);
    assert_eq!(forecasts.len(), 3);
}

fn forecast() -> impl Strategy<Value = CriticForecast> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(l, s, r)| CriticForecast { r_large: l, r_small: s, r_ran: r })
}

proptest! {
    #[test]
    fn weight_scaling_keeps_the_choice(fs in prop::collection::vec(forecast(), 1..6), k in 1e-3f64..1e3) {
        let w = DEFAULT_CLASS_WEIGHTS;
        let scaled = [w[0] * k, w[1] * k, w[2] * k];
        prop_assert_eq!(select_index(&fs, w), select_index(&fs, scaled));
    }

    #[test]
    fn forecasts_stay_in_unit_interval(x in prop::collection::vec(-50.0f64..50.0, 6), seed in 0u64..100) {
        let mlp = Mlp::init(6, 8, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        for y in mlp.forward(&x) {
            prop_assert!((0.0..=1.0).contains(&y));
        }
    }
}
