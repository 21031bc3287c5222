//! Sequential networks: an ordered layer stack with a bound loss.

use thiserror::Error;

use crate::format::{check_spec, InvalidSpec, ModelSpec};
use crate::layers::{build_layer, Layer, LayerError, Mode, ParamSlot};
use crate::losses::{GradientTarget, LossError, LossFunction};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error(transparent)]
    InvalidSpec(#[from] InvalidSpec),
    #[error("layer {index}: {source}")]
    Layer {
        index: usize,
        #[source]
        source: LayerError,
    },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("dimension mismatch: expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("backprop needs a training-mode forward pass first")]
    NoCachedForward,
    #[error("loss configuration error: {0}")]
    LossConfig(String),
    #[error("layer {index} ({kind}) has no serializable form")]
    NotSerializable { index: usize, kind: &'static str },
    #[error("network has no layers")]
    Empty,
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Box<dyn Layer>>,
    loss: LossFunction,
    mode: Mode,
    last_output: Option<Vec<f64>>,
}

fn layer_err(index: usize) -> impl Fn(LayerError) -> NetworkError {
    move |source| NetworkError::Layer { index, source }
}

impl Network {
    /// Builds a network from a validated spec. Dropout streams are keyed
    /// from seed 0; see [`Network::reseed`].
    pub fn from_spec(spec: &ModelSpec) -> Result<Self, NetworkError> {
        check_spec(spec)?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut dim = spec.input_dim;
        for (i, layer) in spec.layers.iter().enumerate() {
            layers.push(build_layer(layer, dim, rng::derive_seed(&[0, i as u64])));
            dim = layer.output_dim(dim);
        }
        Self::from_layers(layers)
    }

    /// Assembles custom layers. Adjacent dimensions must chain. The loss
    /// defaults to cross-entropy when the last layer ends in a softmax and
    /// to MSE otherwise.
    pub fn from_layers(layers: Vec<Box<dyn Layer>>) -> Result<Self, NetworkError> {
        let last = layers.last().ok_or(NetworkError::Empty)?;
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(NetworkError::Layer {
                    index: i + 1,
                    source: LayerError::DimensionMismatch {
                        expected: pair[0].output_dim(),
                        found: pair[1].input_dim(),
                    },
                });
            }
        }
        let loss = if last.ends_in_softmax() {
            LossFunction::crossentropy()
        } else {
            LossFunction::mse()
        };
        Ok(Self {
            layers,
            loss,
            mode: Mode::Inference,
            last_output: None,
        })
    }

    pub fn to_spec(&self) -> Result<ModelSpec, NetworkError> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(index, l)| {
                l.to_spec().ok_or(NetworkError::NotSerializable {
                    index,
                    kind: l.kind(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let spec = ModelSpec::new(self.input_dim(), layers);
        check_spec(&spec)?;
        Ok(spec)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn layers(&self) -> &[Box<dyn Layer>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Layer>] {
        &mut self.layers
    }

    pub fn loss(&self) -> &LossFunction {
        &self.loss
    }

    /// Binds `loss`, rejecting combinations the backward pass cannot
    /// handle: a logit-gradient loss needs a softmax output layer, and a
    /// softmax output needs a logit-gradient loss.
    pub fn set_loss(&mut self, loss: LossFunction) -> Result<(), NetworkError> {
        let softmax_out = self.layers[self.layers.len() - 1].ends_in_softmax();
        let softmax_inside = self.layers.iter().any(|l| l.ends_in_softmax());
        match loss.gradient_target() {
            GradientTarget::PresoftmaxLogits if !softmax_out => {
                return Err(NetworkError::LossConfig(format!(
                    "loss `{}` needs a final dense softmax layer",
                    loss.name()
                )));
            }
            GradientTarget::NetworkOutput if softmax_inside => {
                return Err(NetworkError::LossConfig(format!(
                    "loss `{}` cannot backpropagate through softmax; use a logit-gradient loss",
                    loss.name()
                )));
            }
            _ => {}
        }
        self.loss = loss;
        Ok(())
    }

    pub fn with_loss(mut self, loss: LossFunction) -> Result<Self, NetworkError> {
        self.set_loss(loss)?;
        Ok(self)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Switches every layer at once and discards cached activations.
    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.last_output = None;
        for layer in &mut self.layers {
            layer.set_mode(mode);
        }
    }

    /// Re-keys the random stream of every layer from `seed`.
    pub fn reseed(&mut self, seed: u64) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.reseed(rng::derive_seed(&[seed, i as u64]));
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetworkError> {
        if x.len() != self.input_dim() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Inference-mode evaluation. Takes `&self`, so a network can be
    /// shared across threads for prediction.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(x)?;
        let mut act = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            act = layer.infer(&act).map_err(layer_err(i))?;
        }
        Ok(act)
    }

    /// Mode-dependent forward pass. In training mode this primes
    /// [`backprop`](Self::backprop).
    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(x)?;
        let mut act = x.to_vec();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            act = layer.forward(&act).map_err(layer_err(i))?;
        }
        if self.mode == Mode::Training {
            self.last_output = Some(act.clone());
        }
        Ok(act)
    }

    /// Backpropagates the bound loss for the last forward pass and returns
    /// the loss value. Gradients accumulate into each layer's buffers
    /// until [`update`](Self::update) or [`zero_grads`](Self::zero_grads).
    pub fn backprop(&mut self, y_true: &[f64]) -> Result<f64, NetworkError> {
        self.backprop_to_input(y_true).map(|(loss, _)| loss)
    }

    /// Like [`backprop`](Self::backprop), also returning the gradient of
    /// the loss with respect to the network input.
    pub fn backprop_to_input(&mut self, y_true: &[f64]) -> Result<(f64, Vec<f64>), NetworkError> {
        if self.mode != Mode::Training {
            return Err(NetworkError::NoCachedForward);
        }
        let y_pred = self.last_output.take().ok_or(NetworkError::NoCachedForward)?;
        let loss = self.loss.loss(y_true, &y_pred)?;
        let seed = self.loss.d_loss(y_true, &y_pred)?;

        let last = self.layers.len() - 1;
        let mut grad = match self.loss.gradient_target() {
            GradientTarget::NetworkOutput => self.layers[last].backward(&seed),
            GradientTarget::PresoftmaxLogits => self.layers[last].backward_from_logits(&seed),
        }
        .map_err(layer_err(last))?;
        for i in (0..last).rev() {
            grad = self.layers[i].backward(&grad).map_err(layer_err(i))?;
        }
        Ok((loss, grad))
    }

    /// Gradient-descent step `p ← p − lr·grad(p)`, then clears gradients.
    pub fn update(&mut self, lr: f64) {
        for slot in self.param_slots() {
            for (p, g) in slot.values.iter_mut().zip(slot.grads.iter_mut()) {
                *p -= lr * *g;
                *g = 0.0;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for slot in self.param_slots() {
            slot.grads.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for slot in self.param_slots() {
            slot.grads.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        self.layers.iter_mut().flat_map(|l| l.param_slots()).collect()
    }

    /// All trainable parameters, flattened in layer then slot order.
    pub fn parameters(&mut self) -> Vec<f64> {
        self.param_slots().into_iter().flat_map(|s| s.values.to_vec()).collect()
    }

    /// Gradient buffers flattened in the same order as
    /// [`parameters`](Self::parameters).
    pub fn gradients(&mut self) -> Vec<f64> {
        self.param_slots().into_iter().flat_map(|s| s.grads.to_vec()).collect()
    }

    pub fn parameter_count(&mut self) -> usize {
        self.param_slots().iter().map(|s| s.values.len()).sum()
    }

    /// Mutable access to flattened parameter `index`.
    pub fn parameter_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for slot in self.param_slots() {
            if index < slot.values.len() {
                return Some(&mut slot.values[index]);
            }
            index -= slot.values.len();
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{parse_model, ActivationKind, ActivationSpec, LayerSpec};
    use crate::layers::{Dense, Dropout};

    const IDENTITY: &str = "FKBX 1\nlayers 1\ninput 2\ndense 2 linear 0\nb 0 0\nW 1 0\nW 0 1\n";

    fn identity() -> Network {
        Network::from_spec(&parse_model(IDENTITY).unwrap()).unwrap()
    }

    fn scalar_net(w: f64) -> Network {
        let layer = Dense::new(vec![vec![w]], vec![0.0], ActivationKind::Linear.into()).unwrap();
        Network::from_layers(vec![Box::new(layer)]).unwrap()
    }

    #[test]
    fn identity_predict() {
        assert_eq!(identity().predict(&[3.5, -1.0]).unwrap(), [3.5, -1.0]);
        assert!(matches!(
            identity().predict(&[1.0]),
            Err(NetworkError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn spec_round_trip() {
        let spec = parse_model(IDENTITY).unwrap();
        assert!(Network::from_spec(&spec).unwrap().to_spec().unwrap().bit_eq(&spec));
    }

    #[test]
    fn from_layers_checks_chaining() {
        let a = Dense::new(vec![vec![1.0, 1.0]; 3], vec![0.0; 3], ActivationKind::Linear.into()).unwrap();
        let b = Dense::new(vec![vec![1.0; 4]], vec![0.0], ActivationKind::Linear.into()).unwrap();
        let err = Network::from_layers(vec![Box::new(a), Box::new(b)]).unwrap_err();
        assert!(matches!(err, NetworkError::Layer { index: 1, .. }));
        assert_eq!(Network::from_layers(vec![]).unwrap_err(), NetworkError::Empty);
    }

    #[test]
    fn perfect_prediction_has_zero_loss_and_grads() {
        let mut net = identity();
        net.set_mode(Mode::Training);
        net.forward(&[0.5, 2.0]).unwrap();
        assert_eq!(net.backprop(&[0.5, 2.0]).unwrap(), 0.0);
        assert!(net.gradients().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backprop_requires_training_forward() {
        let mut net = identity();
        net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(net.backprop(&[1.0, 1.0]), Err(NetworkError::NoCachedForward));
        net.set_mode(Mode::Training);
        assert_eq!(net.backprop(&[1.0, 1.0]), Err(NetworkError::NoCachedForward));
        net.forward(&[1.0, 1.0]).unwrap();
        assert!(matches!(net.backprop(&[1.0]), Err(NetworkError::Loss(LossError::ShapeMismatch { .. }))));
    }

    #[test]
    fn lr_zero_update_is_noop() {
        let mut net = identity();
        net.set_mode(Mode::Training);
        net.forward(&[1.0, 2.0]).unwrap();
        net.backprop(&[0.0, 0.0]).unwrap();
        let before = net.parameters();
        net.update(0.0);
        assert_eq!(net.parameters(), before);
        assert!(net.gradients().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_weight_gradient_step() {
        // loss (w·1 − 1)² at w = 0: gradient −2, so lr 0.5 lands on w = 1
        let mut net = scalar_net(0.0);
        net.set_mode(Mode::Training);
        net.forward(&[1.0]).unwrap();
        net.backprop(&[1.0]).unwrap();
        assert_eq!(net.gradients(), [-2.0, -2.0]);
        net.update(0.5);
        assert_eq!(net.parameters(), [1.0, 1.0]);
    }

    #[test]
    fn predict_matches_manual_composition() {
        let l1 = Dense::new(vec![vec![0.5, -1.0], vec![0.25, 2.0], vec![1.0, 1.0]], vec![0.1, 0.0, -0.2], ActivationSpec::leaky_relu(0.1)).unwrap();
        let l2 = Dropout::new(3, 0.3, 5);
        let l3 = Dense::new(vec![vec![1.0, -1.0, 0.5]], vec![0.3], ActivationKind::Tanh.into()).unwrap();
        let x = [0.7, -0.2];
        let manual = l3.infer(&l2.infer(&l1.infer(&x).unwrap()).unwrap()).unwrap();
        let net = Network::from_layers(vec![Box::new(l1), Box::new(l2), Box::new(l3)]).unwrap();
        assert_eq!(net.predict(&x).unwrap(), manual);
    }

    #[test]
    fn softmax_loss_pairing_is_enforced() {
        let soft = Dense::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0], ActivationKind::Softmax.into()).unwrap();
        let mut net = Network::from_layers(vec![Box::new(soft)]).unwrap();
        assert_eq!(net.loss().name(), "crossentropy");
        assert!(matches!(net.set_loss(LossFunction::mse()), Err(NetworkError::LossConfig(_))));

        let mut lin = identity();
        assert!(matches!(lin.set_loss(LossFunction::crossentropy()), Err(NetworkError::LossConfig(_))));
    }

    #[test]
    fn fused_softmax_seed_is_pred_minus_true() {
        let soft = Dense::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], ActivationKind::Softmax.into()).unwrap();
        let mut net = Network::from_layers(vec![Box::new(soft)]).unwrap();
        net.set_mode(Mode::Training);
        let x = [0.3, -0.4];
        let y_pred = net.forward(&x).unwrap();
        let y_true = [0.0, 1.0];
        net.backprop(&y_true).unwrap();
        // with identity weights and x as input, db equals the logit seed
        let grads = net.gradients();
        let db = &grads[4..];
        for (g, (p, t)) in db.iter().zip(y_pred.iter().zip(&y_true)) {
            assert_eq!(*g, p - t);
        }
    }

    #[test]
    fn mode_switch_reaches_every_layer() {
        let spec = parse_model(
            "FKBX 1\nlayers 2\ninput 2\ndense 2 relu 0\nb 0 0\nW 1 0\nW 0 1\ndropout 0.5\n",
        )
        .unwrap();
        let mut net = Network::from_spec(&spec).unwrap();
        net.set_mode(Mode::Training);
        assert!(net.layers().iter().all(|l| l.mode() == Mode::Training));
        net.set_mode(Mode::Inference);
        assert!(net.layers().iter().all(|l| l.mode() == Mode::Inference));
        assert!(matches!(spec.layers[1], LayerSpec::Dropout { .. }));
    }

    #[test]
    fn parameter_indexing() {
        let mut net = identity();
        assert_eq!(net.parameter_count(), 6);
        *net.parameter_mut(5).unwrap() = 9.0;
        assert_eq!(net.parameters()[5], 9.0);
        assert!(net.parameter_mut(6).is_none());
    }
}
