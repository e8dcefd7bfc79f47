use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::mlp::{Adam, Mlp};
use super::model::CriticModel;
use super::CriticError;

/// One `(state, action) -> realized fulfillment` observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: Vec<f64>,
    /// Large-AI, small-AI and RAN fulfillment over the following epoch.
    pub label: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub holdout: f64,
    pub min_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { hidden: 64, learning_rate: 1e-3, batch_size: 32, epochs: 60, holdout: 0.2, min_samples: 200, seed: 7 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub model: CriticModel<T>,
    /// Training-split MSE after each epoch.
    pub train_loss: Vec<f64>,
    /// Validation-split MSE after each epoch.
    pub val_loss: Vec<f64>,
    pub untrained_train_mse: f64,
    pub untrained_val_mse: f64,
    pub train_samples: usize,
    pub val_samples: usize,
}

/// Fits the critic by mini-batch Adam on mean squared error, holding out a
/// fraction of the samples for validation.
pub fn train<T: Scalar>(samples: &[TrainingSample], nodes: usize, cfg: &TrainConfig) -> Result<TrainReport<T>, CriticError> {
    if samples.len() < cfg.min_samples.max(2) {
        return Err(CriticError::TooFewSamples { found: samples.len(), required: cfg.min_samples.max(2) });
    }
    let dim = samples[0].features.len();
    if let Some(bad) = samples.iter().find(|s| s.features.len() != dim) {
        return Err(CriticError::ShapeMismatch { expected: dim, found: bad.features.len() });
    }
    if samples.iter().any(|s| s.label.iter().any(|&l| !(0.0..=1.0).contains(&l))) {
        return Err(CriticError::Format("labels must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((samples.len() as f64 * cfg.holdout).round() as usize).clamp(1, samples.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);

    let mut mean = vec![0.0; dim];
    let mut var = vec![0.0; dim];
    for &i in train_idx {
        for (m, v) in mean.iter_mut().zip(&samples[i].features) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= train_idx.len() as f64);
    for &i in train_idx {
        for ((s, v), m) in var.iter_mut().zip(&samples[i].features).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|s| (s / train_idx.len() as f64).sqrt())
        .map(|s| if s > 1e-8 { s } else { 1.0 })
        .collect();

    let mlp = Mlp::<T>::init(dim, cfg.hidden, 3, &mut rng);
    let mut model = CriticModel { nodes, mean: mean.iter().map(|&v| T::of(v)).collect(), std: std.iter().map(|&v| T::of(v)).collect(), mlp };
    let encode = |idx: &[usize], model: &CriticModel<T>| -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        idx.iter()
            .map(|&i| {
                let x = model.standardize(&samples[i].features).expect("shape checked");
                (x, samples[i].label.iter().map(|&l| T::of(l)).collect())
            })
            .unzip()
    };
    let (xt, yt) = encode(train_idx, &model);
    let (xv, yv) = encode(val_idx, &model);
    let untrained_train_mse = model.mlp.mse(&xt, &yt).as_f64();
    let untrained_val_mse = model.mlp.mse(&xv, &yv).as_f64();

    let mut adam = Adam::new(&model.mlp, cfg.learning_rate);
    let mut batch_order: Vec<usize> = (0..xt.len()).collect();
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        batch_order.shuffle(&mut rng);
        for chunk in batch_order.chunks(cfg.batch_size.max(1)) {
            let xs: Vec<&[T]> = chunk.iter().map(|&i| xt[i].as_slice()).collect();
            let ys: Vec<&[T]> = chunk.iter().map(|&i| yt[i].as_slice()).collect();
            let (_, grad) = model.mlp.gradients(&xs, &ys);
            adam.update(&mut model.mlp, &grad);
        }
        let tl = model.mlp.mse(&xt, &yt).as_f64();
        let vl = model.mlp.mse(&xv, &yv).as_f64();
        if !tl.is_finite() || !vl.is_finite() {
            return Err(CriticError::Divergent { epoch, config: format!("{cfg:?}") });
        }
        train_loss.push(tl);
        val_loss.push(vl);
    }
    Ok(TrainReport {
        model,
        train_loss,
        val_loss,
        untrained_train_mse,
        untrained_val_mse,
        train_samples: xt.len(),
        val_samples: xv.len(),
    })
}
