//! Sparsity estimator: a two-hidden-layer ReLU perceptron mapping the
//! measured field to `(k / N, contrast)`.

mod file;
mod mlp;
mod rmsprop;
mod train;

pub use file::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use mlp::{Dense, Gradients, MlpModel, HIDDEN_1, HIDDEN_2, OUTPUTS};
pub use rmsprop::RmsProp;
pub use train::{evaluate_loss, targets_of, train, train_on_dataset, TrainConfig};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measurements::MeasurementSet;

/// `[Re(e); Im(e)] * scale`.
pub fn featurize(values: &DVector<Complex64>, scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * values.len());
    out.extend(values.iter().map(|z| z.re * scale));
    out.extend(values.iter().map(|z| z.im * scale));
    out
}

/// Inverse of [`featurize`].
pub fn defeaturize(features: &[f64], scale: f64) -> Result<DVector<Complex64>> {
    if features.len() % 2 != 0 {
        return Err(Error::invalid("feature vector length must be even"));
    }
    if !(scale.is_finite() && scale != 0.0) {
        return Err(Error::invalid("feature scale must be finite and non-zero"));
    }
    let h = features.len() / 2;
    Ok(DVector::from_fn(h, |i, _| {
        Complex64::new(features[i] / scale, features[h + i] / scale)
    }))
}

/// `1 / max |e|` over a corpus of unscaled feature vectors.
pub fn feature_scale<'a>(corpus: impl IntoIterator<Item = &'a [f64]>) -> Result<f64> {
    let mut max = 0.0_f64;
    for f in corpus {
        let h = f.len() / 2;
        for i in 0..h {
            max = max.max(f[i].hypot(f[h + i]));
        }
    }
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::invalid("training corpus has no non-zero measurements"));
    }
    Ok(1.0 / max)
}

/// Raw network output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub k_norm: f64,
    pub contrast_est: f64,
}

impl Prediction {
    /// `clamp(round(k_norm * n), 0, n)`.
    pub fn k_hat(&self, n: usize) -> usize {
        let k = (self.k_norm * n as f64).round();
        if k.is_nan() || k <= 0.0 {
            0
        } else {
            (k as usize).min(n)
        }
    }
}

/// Sparsity estimate for a measurement set on a grid of `n` cells.
pub fn predict_k(model: &MlpModel, meas: &MeasurementSet, n: usize) -> Result<usize> {
    Ok(predict(model, &meas.values)?.k_hat(n))
}

pub fn predict(model: &MlpModel, values: &DVector<Complex64>) -> Result<Prediction> {
    let scale = model
        .feature_scale
        .ok_or_else(|| Error::InvalidState("model has no feature scale; train or load it first".into()))?;
    model.forward_pass(&featurize(values, scale))
}
