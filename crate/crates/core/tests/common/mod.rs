#![allow(dead_code)]

use fkb_core::format::{BatchNormSpec, DenseSpec};
use fkb_core::rng::{self, PolarGaussian, Stream};
use fkb_core::{ActivationKind, ActivationSpec, LayerSpec, ModelSpec, SpecBuilder};
use rand::Rng;

pub const IDENTITY: &str = "FKBX 1\nlayers 1\ninput 2\ndense 2 linear 0\nb 0 0\nW 1 0\nW 0 1\n";

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Floats spanning ordinary values, extreme exponents, signed zeros and
/// subnormals.
pub fn awkward_float(rng: &mut Stream) -> f64 {
    match rng.random_range(0..10u32) {
        0 => 0.0,
        1 => -0.0,
        2 => f64::from_bits(rng.random_range(1..(1u64 << 52))),
        3 => {
            let exp = rng.random_range(-300..300);
            rng.random_range(-1.0..1.0) * 10f64.powi(exp)
        }
        4 => [f64::MAX, f64::MIN, f64::MIN_POSITIVE, f64::EPSILON, 0.1, 1.0 / 3.0][rng.random_range(0..6)],
        _ => rng.random_range(-3.0..3.0),
    }
}

pub fn awkward_vec(rng: &mut Stream, n: usize) -> Vec<f64> {
    (0..n).map(|_| awkward_float(rng)).collect()
}

const HIDDEN: [ActivationKind; 5] = [
    ActivationKind::Linear,
    ActivationKind::Relu,
    ActivationKind::LeakyRelu,
    ActivationKind::Sigmoid,
    ActivationKind::Tanh,
];

/// A random spec that satisfies every invariant.
pub fn random_spec(rng: &mut Stream) -> ModelSpec {
    let input_dim = rng.random_range(1..6);
    let n_layers = rng.random_range(1..6);
    let mut dim = input_dim;
    let mut layers = Vec::with_capacity(n_layers);
    let mut kinds: Vec<u32> = (0..n_layers).map(|_| rng.random_range(0..3u32)).collect();
    if !kinds.contains(&0) {
        kinds[0] = 0;
    }
    let last_dense = kinds.iter().rposition(|&k| k == 0).unwrap();
    for (i, kind) in kinds.into_iter().enumerate() {
        let layer = match kind {
            0 => {
                let out = rng.random_range(1..6);
                let act_kind = if i == last_dense && rng.random_bool(0.2) {
                    ActivationKind::Softmax
                } else {
                    HIDDEN[rng.random_range(0..HIDDEN.len())]
                };
                let alpha = match rng.random_range(0..4u32) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.random_range(0.0..1.0),
                };
                let weights = (0..out).map(|_| awkward_vec(rng, dim)).collect();
                let biases = awkward_vec(rng, out);
                dim = out;
                LayerSpec::Dense(DenseSpec {
                    activation: ActivationSpec { kind: act_kind, alpha },
                    weights,
                    biases,
                })
            }
            1 => LayerSpec::Dropout {
                rate: if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) },
            },
            _ => LayerSpec::BatchNorm(BatchNormSpec {
                epsilon: 10f64.powi(rng.random_range(-12..0)) * rng.random_range(0.5..5.0),
                gamma: awkward_vec(rng, dim),
                beta: awkward_vec(rng, dim),
                moving_mean: awkward_vec(rng, dim),
                moving_variance: awkward_vec(rng, dim).into_iter().map(f64::abs).collect(),
            }),
        };
        layers.push(layer);
    }
    ModelSpec::new(input_dim, layers)
}

pub fn gaussian_vec(rng: &mut Stream, gauss: &mut PolarGaussian, n: usize) -> Vec<f64> {
    (0..n).map(|_| gauss.sample(rng)).collect()
}

/// Randomizes batchnorm statistics so the layers are not identities.
pub fn perturb_batchnorm(spec: &mut ModelSpec, seed: u64) {
    let mut rng = rng::stream(seed);
    for layer in &mut spec.layers {
        if let LayerSpec::BatchNorm(bn) = layer {
            for i in 0..bn.gamma.len() {
                bn.gamma[i] = rng.random_range(0.5..1.5);
                bn.beta[i] = rng.random_range(-0.2..0.2);
                bn.moving_mean[i] = rng.random_range(-0.2..0.2);
                bn.moving_variance[i] = rng.random_range(0.5..2.0);
            }
        }
    }
}

/// The case-study architecture family: 94 inputs, 65 outputs, `hidden`
/// dense layers of `width` units with optional batchnorm and dropout.
pub fn case_study_spec(hidden: usize, width: usize, alpha: f64, batchnorm: bool, dropout: f64, seed: u64) -> ModelSpec {
    let mut b = SpecBuilder::new(94);
    for _ in 0..hidden {
        b = b.dense(width, ActivationSpec::leaky_relu(alpha));
        if batchnorm {
            b = b.batchnorm(1e-3);
        }
        b = b.dropout(dropout);
    }
    let mut spec = b.dense(65, ActivationKind::Linear).build(seed);
    perturb_batchnorm(&mut spec, seed ^ 0xb7);
    spec
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
