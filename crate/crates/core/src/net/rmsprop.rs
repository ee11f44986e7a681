use ndarray::{Array1, Array2, Zip};

use super::mlp::{Gradients, MlpModel};
use crate::error::{Error, Result};

/// RMSprop without momentum:
///
/// ```text
/// v     <- rho v + (1 - rho) g^2
/// theta <- theta - lr g / (sqrt(v) + eps)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Squared-gradient averages, `(weights, bias)` per layer.
    accumulators: Vec<(Array2<f64>, Array1<f64>)>,
}

impl RmsProp {
    pub fn new(model: &MlpModel) -> Self {
        Self::with_params(model, 0.001, 0.9, 1e-8)
    }

    pub fn with_params(model: &MlpModel, learning_rate: f64, rho: f64, epsilon: f64) -> Self {
        RmsProp {
            learning_rate,
            rho,
            epsilon,
            accumulators: model
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn accumulators(&self) -> &[(Array2<f64>, Array1<f64>)] {
        &self.accumulators
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        let (lr, rho, eps) = (self.learning_rate, self.rho, self.epsilon);
        for ((layer, g), (vw, vb)) in model.layers.iter_mut().zip(&grads.layers).zip(&mut self.accumulators) {
            if layer.weights.raw_dim() != g.weights.raw_dim() || layer.bias.len() != g.bias.len() {
                return Err(Error::invalid("gradient shape does not match the model"));
            }
            Zip::from(&mut layer.weights)
                .and(vw)
                .and(&g.weights)
                .for_each(|t, v, &g| update(t, v, g, lr, rho, eps));
            Zip::from(&mut layer.bias)
                .and(vb)
                .and(&g.bias)
                .for_each(|t, v, &g| update(t, v, g, lr, rho, eps));
        }
        Ok(())
    }
}

#[inline]
fn update(theta: &mut f64, v: &mut f64, g: f64, lr: f64, rho: f64, eps: f64) {
    *v = rho * *v + (1.0 - rho) * g * g;
    *theta -= lr * g / (v.sqrt() + eps);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::mlp::Dense;
    use ndarray::array;

    fn scalar_model(theta: f64) -> MlpModel {
        MlpModel::from_layers([
            Dense {
                weights: array![[theta]],
                bias: array![0.0],
            },
            Dense {
                weights: array![[1.0]],
                bias: array![0.0],
            },
            Dense {
                weights: array![[1.0], [1.0]],
                bias: array![0.0, 0.0],
            },
        ])
        .unwrap()
    }

    fn unit_gradient_on_first_weight(m: &MlpModel) -> Gradients {
        let mut g = m.zero_gradients();
        g.layers[0].weights[(0, 0)] = 1.0;
        g
    }

    #[test]
    fn first_step_matches_hand_formula() {
        let mut m = scalar_model(0.5);
        let mut opt = RmsProp::new(&m);
        let g = unit_gradient_on_first_weight(&m);
        opt.step(&mut m, &g).unwrap();
        let expected = 0.5 - 0.001 / (0.1_f64.sqrt() + 1e-8);
        assert!((m.layers[0].weights[(0, 0)] - expected).abs() < 1e-15);
        assert!((opt.accumulators()[0].0[(0, 0)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn second_identical_step_is_smaller() {
        let mut m = scalar_model(0.0);
        let mut opt = RmsProp::new(&m);
        let g = unit_gradient_on_first_weight(&m);
        opt.step(&mut m, &g).unwrap();
        let first = -m.layers[0].weights[(0, 0)];
        opt.step(&mut m, &g).unwrap();
        let second = -m.layers[0].weights[(0, 0)] - first;
        // v2 = 0.9 * 0.1 + 0.1 = 1 - 0.9^2
        let closed = 0.001 / ((1.0 - 0.81_f64).sqrt() + 1e-8);
        assert!((second - closed).abs() < 1e-15);
        assert!(second < first);
    }

    #[test]
    fn zero_gradient_only_decays_state() {
        let mut m = scalar_model(0.5);
        let mut opt = RmsProp::new(&m);
        let g = unit_gradient_on_first_weight(&m);
        opt.step(&mut m, &g).unwrap();
        let before = m.clone();
        let zero = m.zero_gradients();
        opt.step(&mut m, &zero).unwrap();
        assert_eq!(m, before);
        assert!((opt.accumulators()[0].0[(0, 0)] - 0.09).abs() < 1e-15);
        assert!(opt.accumulators().iter().all(|(w, b)| w.iter().chain(b.iter()).all(|v| *v >= 0.0)));
    }
}
