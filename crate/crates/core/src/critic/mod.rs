//! Learned critic that forecasts class-resolved fulfillment of a candidate
//! migration and picks among the agent's shortlist.

mod features;
mod mlp;
mod model;
mod train;

use thiserror::Error;

use crate::placement::{EpochSnapshot, MigrationAction};
use crate::scalar::Scalar;

pub use features::{encode_features, feature_len, ACTION_FEATURES};
pub use mlp::{Adam, Gradients, Mlp};
pub use model::{CriticForecast, CriticModel, FORMAT_VERSION};
pub use train::{train, TrainConfig, TrainReport, TrainingSample};

/// Default urgency weights for large-AI, small-AI and RAN forecasts.
pub const DEFAULT_CLASS_WEIGHTS: [f64; 3] = [1.0, 1.0, 2.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticError {
    #[error("feature length {found} does not match the model's {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("need at least {required} training samples, found {found}")]
    TooFewSamples { found: usize, required: usize },
    #[error("training diverged at epoch {epoch} with {config}")]
    Divergent { epoch: usize, config: String },
    #[error("model format: {0}")]
    Format(String),
    #[error("model io: {0}")]
    Io(String),
}

/// Index of the best weighted-mean forecast; ties keep the earlier entry.
pub fn select_index(forecasts: &[CriticForecast], weights: [f64; 3]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in forecasts.iter().enumerate() {
        let score = f.weighted(weights);
        if best.map_or(true, |(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores every shortlist entry with the critic and returns the best one.
pub fn select<T: Scalar>(
    shortlist: &[MigrationAction],
    snapshot: &EpochSnapshot,
    model: &CriticModel<T>,
    weights: [f64; 3],
) -> Result<(MigrationAction, Vec<CriticForecast>), CriticError> {
    let forecasts = shortlist
        .iter()
        .map(|a| model.forecast(&encode_features(snapshot, a)))
        .collect::<Result<Vec<_>, _>>()?;
    let i = select_index(&forecasts, weights).unwrap_or(0);
    Ok((shortlist.get(i).copied().unwrap_or(MigrationAction::NoOp), forecasts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(l: f64, s: f64, r: f64) -> CriticForecast {
        CriticForecast { r_large: l, r_small: s, r_ran: r }
    }

    #[test]
    fn weighted_mean_prefers_ran_protection() {
        let a = f(0.9, 0.9, 0.9);
        let b = f(1.0, 1.0, 0.5);
        assert!((a.weighted(DEFAULT_CLASS_WEIGHTS) - 0.9).abs() < 1e-12);
        assert!((b.weighted(DEFAULT_CLASS_WEIGHTS) - 0.75).abs() < 1e-12);
        assert_eq!(select_index(&[a, b], DEFAULT_CLASS_WEIGHTS), Some(0));
    }

    #[test]
    fn ties_and_singletons() {
        assert_eq!(select_index(&[f(0.3, 0.3, 0.3)], DEFAULT_CLASS_WEIGHTS), Some(0));
        assert_eq!(select_index(&[f(0.5, 0.5, 0.5), f(0.5, 0.5, 0.5)], DEFAULT_CLASS_WEIGHTS), Some(0));
        assert_eq!(select_index(&[], DEFAULT_CLASS_WEIGHTS), None);
    }
}
