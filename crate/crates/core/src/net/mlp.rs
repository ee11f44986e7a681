use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::Prediction;
use crate::error::{Error, Result};
use crate::measurements::seeded_rng;

pub const HIDDEN_1: usize = 2048;
pub const HIDDEN_2: usize = 64;
pub const OUTPUTS: usize = 2;

/// Affine layer `y = W x + b`, `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Glorot-uniform weights, zero biases.
    fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            weights: Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-limit..=limit)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    /// Row-batched affine map: `x W^T + b`.
    fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        z
    }
}

/// Parameter gradients, one [`Dense`] per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: [Dense; 3],
}

/// Input -> ReLU hidden -> ReLU hidden -> 2 linear outputs
/// (`k / N`, contrast).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: [Dense; 3],
    /// Featurisation scale fixed at training time; `None` until trained.
    pub feature_scale: Option<f64>,
    pub seed: u64,
    /// Hash of the dataset the model was trained on, empty if none.
    pub spec_hash: String,
}

fn relu(mut z: Array2<f64>) -> Array2<f64> {
    z.mapv_inplace(|v| v.max(0.0));
    z
}

impl MlpModel {
    /// Production architecture `input -> 2048 -> 64 -> 2`.
    pub fn new(input_dim: usize, seed: u64) -> Self {
        Self::with_hidden(input_dim, HIDDEN_1, HIDDEN_2, seed)
    }

    pub fn with_hidden(input_dim: usize, h1: usize, h2: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        MlpModel {
            layers: [
                Dense::glorot(input_dim, h1, &mut rng),
                Dense::glorot(h1, h2, &mut rng),
                Dense::glorot(h2, OUTPUTS, &mut rng),
            ],
            feature_scale: None,
            seed,
            spec_hash: String::new(),
        }
    }

    /// Builds a model from explicit layers, checking shapes and finiteness.
    pub fn from_layers(layers: [Dense; 3]) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::invalid(format!("layer {i}: bias length mismatch")));
            }
            if i > 0 && l.inputs() != layers[i - 1].outputs() {
                return Err(Error::invalid(format!("layer {i}: input width mismatch")));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {i}: non-finite parameter")));
            }
        }
        if layers[2].outputs() != OUTPUTS {
            return Err(Error::invalid("output layer must have 2 units"));
        }
        Ok(MlpModel {
            layers,
            feature_scale: None,
            seed: 0,
            spec_hash: String::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    /// `(input, hidden 1, hidden 2, output)`.
    pub fn dims(&self) -> [usize; 4] {
        [
            self.input_dim(),
            self.layers[0].outputs(),
            self.layers[1].outputs(),
            self.layers[2].outputs(),
        ]
    }

    pub fn zero_gradients(&self) -> Gradients {
        let d = self.dims();
        Gradients {
            layers: [
                Dense::zeros(d[0], d[1]),
                Dense::zeros(d[1], d[2]),
                Dense::zeros(d[2], d[3]),
            ],
        }
    }

    fn check_batch(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "feature dimension {} does not match model input {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Outputs for a batch of feature rows, `B x 2`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&x)?;
        let a1 = relu(self.layers[0].apply(&x));
        let a2 = relu(self.layers[1].apply(&a1.view()));
        Ok(self.layers[2].apply(&a2.view()))
    }

    pub fn forward_pass(&self, features: &[f64]) -> Result<Prediction> {
        let x = ArrayView2::from_shape((1, features.len()), features)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let y = self.forward_batch(x)?;
        Ok(Prediction {
            k_norm: y[(0, 0)],
            contrast_est: y[(0, 1)],
        })
    }

    /// Mean over the batch of `|y - t|^2 / 2`; `targets` is `B x 2`.
    pub fn loss(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<f64> {
        let y = self.forward_batch(x)?;
        check_targets(&y, &targets)?;
        Ok((&y - &targets).mapv(|d| d * d).sum() / (2.0 * y.nrows() as f64))
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Gradients)> {
        self.check_batch(&x)?;
        let b = x.nrows();
        if b == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let [l1, l2, l3] = &self.layers;
        let z1 = l1.apply(&x);
        let a1 = relu(z1.clone());
        let z2 = l2.apply(&a1.view());
        let a2 = relu(z2.clone());
        let y = l3.apply(&a2.view());
        check_targets(&y, &targets)?;

        let diff = &y - &targets;
        let loss = diff.mapv(|d| d * d).sum() / (2.0 * b as f64);

        let d3 = diff / b as f64;
        let g3 = Dense {
            weights: d3.t().dot(&a2),
            bias: d3.sum_axis(Axis(0)),
        };
        let mut d2 = d3.dot(&l3.weights);
        d2.zip_mut_with(&z2, |d, z| {
            if *z <= 0.0 {
                *d = 0.0
            }
        });
        let g2 = Dense {
            weights: d2.t().dot(&a1),
            bias: d2.sum_axis(Axis(0)),
        };
        let mut d1 = d2.dot(&l2.weights);
        d1.zip_mut_with(&z1, |d, z| {
            if *z <= 0.0 {
                *d = 0.0
            }
        });
        let g1 = Dense {
            weights: d1.t().dot(&x),
            bias: d1.sum_axis(Axis(0)),
        };
        Ok((loss, Gradients { layers: [g1, g2, g3] }))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

fn check_targets(y: &Array2<f64>, t: &ArrayView2<f64>) -> Result<()> {
    if y.dim() != t.dim() {
        return Err(Error::invalid(format!(
            "targets have shape {:?}, expected {:?}",
            t.dim(),
            y.dim()
        )));
    }
    Ok(())
}
