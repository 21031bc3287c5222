//! Seeded construction of fresh model specs.

use rand::Rng;

use crate::format::{ActivationSpec, BatchNormSpec, DenseSpec, LayerSpec, ModelSpec};
use crate::rng;

#[derive(Debug, Clone)]
enum Planned {
    Dense { out: usize, activation: ActivationSpec },
    Dropout(f64),
    BatchNorm(f64),
}

/// Describes a sequential architecture and fills in initial parameters.
///
/// Dense weights are Glorot-uniform, biases zero. Batchnorm layers start
/// at `gamma = 1, beta = 0, mean = 0, variance = 1`.
#[derive(Debug, Clone)]
pub struct SpecBuilder {
    input_dim: usize,
    planned: Vec<Planned>,
}

impl SpecBuilder {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            planned: Vec::new(),
        }
    }

    pub fn dense(mut self, out: usize, activation: impl Into<ActivationSpec>) -> Self {
        self.planned.push(Planned::Dense {
            out,
            activation: activation.into(),
        });
        self
    }

    pub fn dropout(mut self, rate: f64) -> Self {
        self.planned.push(Planned::Dropout(rate));
        self
    }

    pub fn batchnorm(mut self, epsilon: f64) -> Self {
        self.planned.push(Planned::BatchNorm(epsilon));
        self
    }

    pub fn build(&self, seed: u64) -> ModelSpec {
        let mut rng = rng::stream(seed);
        let mut dim = self.input_dim;
        let layers = self
            .planned
            .iter()
            .map(|p| match *p {
                Planned::Dense { out, activation } => {
                    let limit = (6.0 / (dim + out) as f64).sqrt();
                    let weights = (0..out)
                        .map(|_| (0..dim).map(|_| rng.random_range(-limit..limit)).collect())
                        .collect();
                    dim = out;
                    LayerSpec::Dense(DenseSpec {
                        activation,
                        weights,
                        biases: vec![0.0; out],
                    })
                }
                Planned::Dropout(rate) => LayerSpec::Dropout { rate },
                Planned::BatchNorm(eps) => LayerSpec::BatchNorm(BatchNormSpec::identity(dim, eps)),
            })
            .collect();
        ModelSpec::new(self.input_dim, layers)
    }
}
