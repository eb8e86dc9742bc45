//! Small deterministic multilayer perceptron with tanh hidden layers,
//! trained by mini-batch gradient descent with momentum under an L2 loss.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("model file version {0} unsupported (expected {MODEL_FORMAT_VERSION})")]
    BadVersion(u32),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model parse: {0}")]
    Parse(#[from] serde_json::Error),
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
}

/// Feed-forward network; hidden layers use tanh, the output is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { lr: 1e-3, momentum: 0.9, batch_size: 64, epochs: 30 }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    sizes: Vec<usize>,
    // row-major weight matrices followed by bias vectors, per layer
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Mlp {
    /// Uniform Xavier initialisation, deterministic in the seed.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                let weights =
                    DMatrix::from_fn(n_out, n_in, |_, _| rng.random_range(-limit..limit));
                Layer { weights, biases: DVector::zeros(n_out) }
            })
            .collect();
        Mlp { sizes: sizes.to_vec(), layers }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Activations per layer for a batch laid out as one column per sample.
    fn forward_trace(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += &layer.biases;
            }
            if i + 1 < self.layers.len() {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward_batch(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.forward_trace(x).pop().unwrap()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let input = DMatrix::from_column_slice(x.len(), 1, x);
        self.forward_batch(&input).column(0).iter().copied().collect()
    }

    /// Mean squared error over every output scalar in the batch.
    pub fn loss(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let pred = self.forward_batch(x);
        (pred - y).map(|e| e * e).sum() / (y.nrows() * y.ncols()) as f64
    }

    /// Backpropagated gradients of the mean squared error; returns
    /// per-layer weight and bias gradients plus the loss itself.
    pub fn grad(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
    ) -> (Vec<DMatrix<f64>>, Vec<DVector<f64>>, f64) {
        let acts = self.forward_trace(x);
        let pred = acts.last().unwrap();
        let n = (y.nrows() * y.ncols()) as f64;
        let err = pred - y;
        let loss = err.map(|e| e * e).sum() / n;

        let mut d_weights = vec![DMatrix::zeros(0, 0); self.layers.len()];
        let mut d_biases = vec![DVector::zeros(0); self.layers.len()];
        // dL/d(output) for the linear head
        let mut delta = err * (2.0 / n);
        for l in (0..self.layers.len()).rev() {
            d_weights[l] = &delta * acts[l].transpose();
            d_biases[l] = DVector::from_iterator(
                delta.nrows(),
                delta.row_iter().map(|r| r.sum()),
            );
            if l > 0 {
                let upstream = self.layers[l].weights.transpose() * delta;
                // tanh'(z) = 1 − a²
                delta = upstream.zip_map(&acts[l], |u, a| u * (1.0 - a * a));
            }
        }
        (d_weights, d_biases, loss)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            sizes: self.sizes.clone(),
            weights: self
                .layers
                .iter()
                .map(|l| l.weights.transpose().as_slice().to_vec())
                .collect(),
            biases: self.layers.iter().map(|l| l.biases.as_slice().to_vec()).collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(TrainError::BadVersion(file.version));
        }
        let layers = file
            .sizes
            .windows(2)
            .zip(file.weights.iter().zip(&file.biases))
            .map(|(w, (wd, bd))| Layer {
                // row-major on disk
                weights: DMatrix::from_row_slice(w[1], w[0], wd),
                biases: DVector::from_column_slice(bd),
            })
            .collect();
        Ok(Mlp { sizes: file.sizes, layers })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TrainError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TrainError> {
        Mlp::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Mini-batch SGD with momentum over a shuffled sample order, deterministic
/// in the seed. Returns the full-set loss after each epoch; aborts with a
/// diagnostic if the loss goes non-finite.
pub fn train(
    model: &mut Mlp,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: &TrainOptions,
    seed: u64,
) -> Result<Vec<f64>, TrainError> {
    let n = x.ncols();
    if n == 0 {
        return Err(TrainError::EmptyDataset);
    }
    assert_eq!(y.ncols(), n, "feature/target sample counts must match");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vel_w: Vec<DMatrix<f64>> =
        model.layers.iter().map(|l| DMatrix::zeros(l.weights.nrows(), l.weights.ncols())).collect();
    let mut vel_b: Vec<DVector<f64>> =
        model.layers.iter().map(|l| DVector::zeros(l.biases.nrows())).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(opts.batch_size.max(1)) {
            let xb = DMatrix::from_fn(x.nrows(), batch.len(), |r, c| x[(r, batch[c])]);
            let yb = DMatrix::from_fn(y.nrows(), batch.len(), |r, c| y[(r, batch[c])]);
            let (gw, gb, loss) = model.grad(&xb, &yb);
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch, loss });
            }
            for l in 0..model.layers.len() {
                vel_w[l] = &vel_w[l] * opts.momentum - &gw[l] * opts.lr;
                vel_b[l] = &vel_b[l] * opts.momentum - &gb[l] * opts.lr;
                model.layers[l].weights += &vel_w[l];
                model.layers[l].biases += &vel_b[l];
            }
        }
        let full = model.loss(x, y);
        if !full.is_finite() {
            return Err(TrainError::Diverged { epoch, loss: full });
        }
        epoch_losses.push(full);
    }
    Ok(epoch_losses)
}
