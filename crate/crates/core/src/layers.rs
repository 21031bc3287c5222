//! Runtime layers. Each layer owns its parameters and computes its own
//! forward pass, parameter gradients, and the gradient handed to the layer
//! below it. New layer kinds plug in by implementing [`Layer`].

use std::fmt;

use thiserror::Error;

use crate::activation::Activation;
use crate::format::{ActivationSpec, BatchNormSpec, DenseSpec, LayerSpec};
use crate::rng::{self, Stream};

/// Smallest epsilon a batchnorm layer will divide with.
pub const MIN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Inference,
    Training,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayerError {
    #[error("dimension mismatch: expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("backward called without a cached training-mode forward pass")]
    NoCachedForward,
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

fn check_len(expected: usize, x: &[f64]) -> Result<(), LayerError> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(LayerError::DimensionMismatch {
            expected,
            found: x.len(),
        })
    }
}

/// A parameter tensor and its gradient buffer, both flattened.
pub struct ParamSlot<'a> {
    pub name: &'static str,
    pub values: &'a mut [f64],
    pub grads: &'a mut [f64],
}

pub trait Layer: fmt::Debug + Send + Sync {
    fn kind(&self) -> &'static str;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn mode(&self) -> Mode;
    /// Switches mode and drops any cached activations.
    fn set_mode(&mut self, mode: Mode);

    /// Inference-mode forward pass. Pure: never touches caches.
    fn infer(&self, x: &[f64]) -> Result<Vec<f64>, LayerError>;

    /// Mode-dependent forward pass. In training mode the layer caches
    /// what its backward pass needs.
    fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, LayerError>;

    /// Accumulates parameter gradients for `upstream = dL/d(output)` and
    /// returns `dL/d(input)`.
    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>, LayerError>;

    /// Backward pass seeded with the gradient with respect to the layer's
    /// pre-activations instead of its output. Only layers ending in a
    /// softmax need it.
    fn backward_from_logits(&mut self, _delta: &[f64]) -> Result<Vec<f64>, LayerError> {
        Err(LayerError::Unsupported(format!(
            "{} layer cannot take a pre-activation gradient",
            self.kind()
        )))
    }

    fn ends_in_softmax(&self) -> bool {
        false
    }

    /// Trainable tensors with their gradient buffers.
    fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        Vec::new()
    }

    /// Re-keys any internal random stream.
    fn reseed(&mut self, _seed: u64) {}

    /// Serializable description, if the layer has one.
    fn to_spec(&self) -> Option<LayerSpec> {
        None
    }

    fn box_clone(&self) -> Box<dyn Layer>;
}

impl Clone for Box<dyn Layer> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Builds the runtime layer for a validated spec entry.
pub fn build_layer(spec: &LayerSpec, input_dim: usize, seed: u64) -> Box<dyn Layer> {
    match spec {
        LayerSpec::Dense(d) => Box::new(Dense::from_spec(d, input_dim)),
        LayerSpec::Dropout { rate } => Box::new(Dropout::new(input_dim, *rate, seed)),
        LayerSpec::BatchNorm(bn) => Box::new(BatchNorm::from_spec(bn)),
    }
}

#[derive(Debug, Clone)]
struct DenseCache {
    input: Vec<f64>,
    z: Vec<f64>,
}

/// Fully connected layer computing `activation(W·x + b)`.
#[derive(Debug, Clone)]
pub struct Dense {
    input_dim: usize,
    output_dim: usize,
    /// Row-major `[output_dim × input_dim]`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
    mode: Mode,
    cache: Option<DenseCache>,
    grad_weights: Vec<f64>,
    grad_biases: Vec<f64>,
}

impl Dense {
    pub fn new(rows: Vec<Vec<f64>>, biases: Vec<f64>, activation: ActivationSpec) -> Result<Self, LayerError> {
        let output_dim = biases.len();
        if rows.len() != output_dim {
            return Err(LayerError::DimensionMismatch {
                expected: output_dim,
                found: rows.len(),
            });
        }
        let input_dim = rows.first().map_or(0, Vec::len);
        for row in &rows {
            check_len(input_dim, row)?;
        }
        Ok(Self::from_flat(input_dim, rows.concat(), biases, activation))
    }

    fn from_spec(spec: &DenseSpec, input_dim: usize) -> Self {
        Self::from_flat(input_dim, spec.weights.concat(), spec.biases.clone(), spec.activation)
    }

    fn from_flat(input_dim: usize, weights: Vec<f64>, biases: Vec<f64>, activation: ActivationSpec) -> Self {
        let output_dim = biases.len();
        Self {
            input_dim,
            output_dim,
            grad_weights: vec![0.0; weights.len()],
            grad_biases: vec![0.0; output_dim],
            weights,
            biases,
            activation: Activation::new(activation),
            mode: Mode::Inference,
            cache: None,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn grad_weights(&self) -> &[f64] {
        &self.grad_weights
    }

    pub fn grad_biases(&self) -> &[f64] {
        &self.grad_biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn preactivation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.input_dim.max(1))
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

impl Layer for Dense {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.cache = None;
    }

    fn infer(&self, x: &[f64]) -> Result<Vec<f64>, LayerError> {
        check_len(self.input_dim, x)?;
        Ok(self.activation.apply(&self.preactivation(x)))
    }

    fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, LayerError> {
        if self.mode == Mode::Inference {
            return self.infer(x);
        }
        check_len(self.input_dim, x)?;
        let z = self.preactivation(x);
        let y = self.activation.apply(&z);
        self.cache = Some(DenseCache { input: x.to_vec(), z });
        Ok(y)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>, LayerError> {
        let cache = self.cache.as_ref().ok_or(LayerError::NoCachedForward)?;
        check_len(self.output_dim, upstream)?;
        let slope = self.activation.derivative(&cache.z).ok_or_else(|| {
            LayerError::Unsupported("softmax gradient is only available fused with cross-entropy".into())
        })?;
        let delta: Vec<f64> = upstream.iter().zip(&slope).map(|(u, s)| u * s).collect();
        self.backward_from_logits(&delta)
    }

    fn backward_from_logits(&mut self, delta: &[f64]) -> Result<Vec<f64>, LayerError> {
        let cache = self.cache.as_ref().ok_or(LayerError::NoCachedForward)?;
        check_len(self.output_dim, delta)?;
        let n = self.input_dim;
        let mut down = vec![0.0; n];
        for (i, &d) in delta.iter().enumerate() {
            let row = &self.weights[i * n..(i + 1) * n];
            let grad_row = &mut self.grad_weights[i * n..(i + 1) * n];
            for j in 0..n {
                grad_row[j] += d * cache.input[j];
                down[j] += row[j] * d;
            }
            self.grad_biases[i] += d;
        }
        Ok(down)
    }

    fn ends_in_softmax(&self) -> bool {
        self.activation.is_softmax()
    }

    fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        vec![
            ParamSlot {
                name: "W",
                values: &mut self.weights,
                grads: &mut self.grad_weights,
            },
            ParamSlot {
                name: "b",
                values: &mut self.biases,
                grads: &mut self.grad_biases,
            },
        ]
    }

    fn to_spec(&self) -> Option<LayerSpec> {
        Some(LayerSpec::Dense(DenseSpec {
            activation: self.activation.spec(),
            weights: self
                .weights
                .chunks_exact(self.input_dim.max(1))
                .map(<[f64]>::to_vec)
                .collect(),
            biases: self.biases.clone(),
        }))
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

/// Inverted dropout: identity at inference, masked and rescaled by
/// `1 / (1 - rate)` in training.
#[derive(Debug, Clone)]
pub struct Dropout {
    dim: usize,
    rate: f64,
    mode: Mode,
    rng: Stream,
    mask: Option<Vec<f64>>,
    frozen: bool,
}

impl Dropout {
    pub fn new(dim: usize, rate: f64, seed: u64) -> Self {
        Self {
            dim,
            rate,
            mode: Mode::Inference,
            rng: rng::stream(seed),
            mask: None,
            frozen: false,
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mask(&self) -> Option<&[f64]> {
        self.mask.as_deref()
    }

    /// While frozen, training-mode forward passes reuse the current mask
    /// instead of drawing a new one.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    fn draw_mask(&mut self) -> Vec<f64> {
        let scale = 1.0 / (1.0 - self.rate);
        (0..self.dim)
            .map(|_| if rng::uniform(&mut self.rng) >= self.rate { scale } else { 0.0 })
            .collect()
    }
}

impl Layer for Dropout {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.mask = None;
    }

    fn infer(&self, x: &[f64]) -> Result<Vec<f64>, LayerError> {
        check_len(self.dim, x)?;
        Ok(x.to_vec())
    }

    fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, LayerError> {
        if self.mode == Mode::Inference {
            return self.infer(x);
        }
        check_len(self.dim, x)?;
        let mask = match self.mask.take() {
            Some(m) if self.frozen => m,
            _ => self.draw_mask(),
        };
        let y = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.mask = Some(mask);
        Ok(y)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>, LayerError> {
        let mask = self.mask.as_ref().ok_or(LayerError::NoCachedForward)?;
        check_len(self.dim, upstream)?;
        Ok(upstream.iter().zip(mask).map(|(u, m)| u * m).collect())
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = rng::stream(seed);
    }

    fn to_spec(&self) -> Option<LayerSpec> {
        Some(LayerSpec::Dropout { rate: self.rate })
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

/// Batch normalization over stored moving statistics. The statistics stay
/// frozen in both modes; only `gamma` and `beta` receive gradients.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    epsilon: f64,
    gamma: Vec<f64>,
    beta: Vec<f64>,
    moving_mean: Vec<f64>,
    moving_variance: Vec<f64>,
    mode: Mode,
    cached_input: Option<Vec<f64>>,
    grad_gamma: Vec<f64>,
    grad_beta: Vec<f64>,
}

impl BatchNorm {
    /// `epsilon` values at or below zero are raised to [`MIN_EPSILON`].
    pub fn from_spec(spec: &BatchNormSpec) -> Self {
        let dim = spec.gamma.len();
        Self {
            epsilon: if spec.epsilon > 0.0 { spec.epsilon } else { MIN_EPSILON },
            gamma: spec.gamma.clone(),
            beta: spec.beta.clone(),
            moving_mean: spec.moving_mean.clone(),
            moving_variance: spec.moving_variance.clone(),
            mode: Mode::Inference,
            cached_input: None,
            grad_gamma: vec![0.0; dim],
            grad_beta: vec![0.0; dim],
        }
    }

    pub fn grad_gamma(&self) -> &[f64] {
        &self.grad_gamma
    }

    pub fn grad_beta(&self) -> &[f64] {
        &self.grad_beta
    }

    fn inv_std(&self, i: usize) -> f64 {
        1.0 / (self.moving_variance[i] + self.epsilon).sqrt()
    }
}

impl Layer for BatchNorm {
    fn kind(&self) -> &'static str {
        "batchnorm"
    }

    fn input_dim(&self) -> usize {
        self.gamma.len()
    }

    fn output_dim(&self) -> usize {
        self.gamma.len()
    }

    fn mode(&self) -> Mode {
        self.mode
    }

    fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.cached_input = None;
    }

    fn infer(&self, x: &[f64]) -> Result<Vec<f64>, LayerError> {
        check_len(self.gamma.len(), x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(i, &v)| self.gamma[i] * (v - self.moving_mean[i]) * self.inv_std(i) + self.beta[i])
            .collect())
    }

    fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, LayerError> {
        let y = self.infer(x)?;
        if self.mode == Mode::Training {
            self.cached_input = Some(x.to_vec());
        }
        Ok(y)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>, LayerError> {
        let x = self.cached_input.as_ref().ok_or(LayerError::NoCachedForward)?;
        check_len(self.gamma.len(), upstream)?;
        let mut down = Vec::with_capacity(upstream.len());
        for (i, &u) in upstream.iter().enumerate() {
            let inv_std = 1.0 / (self.moving_variance[i] + self.epsilon).sqrt();
            self.grad_gamma[i] += u * (x[i] - self.moving_mean[i]) * inv_std;
            self.grad_beta[i] += u;
            down.push(u * self.gamma[i] * inv_std);
        }
        Ok(down)
    }

    fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        vec![
            ParamSlot {
                name: "gamma",
                values: &mut self.gamma,
                grads: &mut self.grad_gamma,
            },
            ParamSlot {
                name: "beta",
                values: &mut self.beta,
                grads: &mut self.grad_beta,
            },
        ]
    }

    fn to_spec(&self) -> Option<LayerSpec> {
        Some(LayerSpec::BatchNorm(BatchNormSpec {
            epsilon: self.epsilon,
            gamma: self.gamma.clone(),
            beta: self.beta.clone(),
            moving_mean: self.moving_mean.clone(),
            moving_variance: self.moving_variance.clone(),
        }))
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}
