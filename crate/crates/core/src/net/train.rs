use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::MlpModel;
use super::rmsprop::RmsProp;
use super::feature_scale;
use crate::dataset::{Dataset, Split, TrainingScenario};
use crate::error::{Error, Result};
use crate::measurements::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            seed: 0,
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// `B x 2` matrix of `(k / N, contrast)` labels.
pub fn targets_of(data: &[&TrainingScenario]) -> Array2<f64> {
    Array2::from_shape_fn((data.len(), 2), |(i, j)| {
        if j == 0 {
            data[i].label_k_norm
        } else {
            data[i].label_contrast
        }
    })
}

fn feature_matrix(data: &[&TrainingScenario], scale: f64, dim: usize) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((data.len(), dim));
    for (mut row, s) in x.axis_iter_mut(Axis(0)).zip(data) {
        if s.features.len() != dim {
            return Err(Error::invalid(format!(
                "scenario {} has {} features, model expects {dim}",
                s.index,
                s.features.len()
            )));
        }
        row.assign(&ndarray::ArrayView1::from(&s.features[..]));
        row *= scale;
    }
    Ok(x)
}

/// Trains `model` in place with minibatch RMSprop and returns the mean
/// training loss of every epoch. Samples are reshuffled each epoch from a
/// generator seeded with `cfg.seed`. If the model has no feature scale yet it
/// is fixed from `data` first.
pub fn train(model: &mut MlpModel, data: &[&TrainingScenario], cfg: &TrainConfig) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    let scale = match model.feature_scale {
        Some(s) => s,
        None => {
            let s = feature_scale(data.iter().map(|d| d.features.as_slice()))?;
            model.feature_scale = Some(s);
            s
        }
    };
    let x = feature_matrix(data, scale, model.input_dim())?;
    let t = targets_of(data);
    let mut opt = RmsProp::with_params(model, cfg.learning_rate, cfg.rho, cfg.epsilon);
    let mut rng = seeded_rng(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let tb = t.select(Axis(0), batch);
            let (loss, grads) = model.loss_and_gradients(xb.view(), tb.view())?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss * batch.len() as f64;
            opt.step(model, &grads)?;
        }
        let mean = total / data.len() as f64;
        if !model.is_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        curve.push(mean);
    }
    Ok(curve)
}

/// Fresh production-size model trained on the training split of `dataset`.
pub fn train_on_dataset(dataset: &Dataset, dataset_hash: &str, cfg: &TrainConfig) -> Result<(MlpModel, Vec<f64>)> {
    let data = dataset.part(Split::Train);
    let dim = data
        .first()
        .map(|s| s.features.len())
        .ok_or_else(|| Error::invalid("dataset has no training scenarios"))?;
    let mut model = MlpModel::new(dim, cfg.seed);
    model.spec_hash = dataset_hash.to_string();
    let curve = train(&mut model, &data, cfg)?;
    Ok((model, curve))
}

/// Loss of `model` on the given scenarios.
pub fn evaluate_loss(model: &MlpModel, data: &[&TrainingScenario]) -> Result<f64> {
    let scale = model
        .feature_scale
        .ok_or_else(|| Error::InvalidState("model has no feature scale".into()))?;
    let x = feature_matrix(data, scale, model.input_dim())?;
    model.loss(x.view(), targets_of(data).view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneKind;

    fn scenario(index: usize, features: Vec<f64>, k: usize, n: usize, contrast: f64) -> TrainingScenario {
        TrainingScenario {
            index,
            kind: SceneKind::Cylinders,
            n,
            k,
            label_contrast: contrast,
            label_k_norm: k as f64 / n as f64,
            features,
        }
    }

    #[test]
    fn memorises_a_single_scenario() {
        let s = scenario(0, vec![0.3, -0.2, 0.9, 0.1, -0.5, 0.4], 12, 100, 0.4);
        let mut m = MlpModel::with_hidden(6, 16, 8, 5);
        let cfg = TrainConfig {
            epochs: 3000,
            batch_size: 1,
            seed: 1,
            ..TrainConfig::default()
        };
        let curve = train(&mut m, &[&s], &cfg).unwrap();
        assert!(*curve.last().unwrap() < 1e-4, "final loss {}", curve.last().unwrap());
    }

    #[test]
    fn deterministic_under_seed() {
        let data: Vec<TrainingScenario> = (0..10)
            .map(|i| scenario(i, (0..4).map(|j| ((i * 4 + j) as f64).sin()).collect(), i + 1, 50, 0.2))
            .collect();
        let refs: Vec<&TrainingScenario> = data.iter().collect();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 3,
            seed: 9,
            ..TrainConfig::default()
        };
        let mut a = MlpModel::with_hidden(4, 8, 4, 2);
        let mut b = a.clone();
        let ca = train(&mut a, &refs, &cfg).unwrap();
        let cb = train(&mut b, &refs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }

    #[test]
    fn empty_training_set_rejected() {
        let mut m = MlpModel::with_hidden(4, 8, 4, 2);
        assert!(train(&mut m, &[], &TrainConfig::default()).is_err());
    }
}
