//! Demo logic, kept free of wasm-bindgen so it can be tested natively.

use fkb_core::activation::Activation;
use fkb_core::format::ActivationSpec;
use fkb_core::{
    fit, parse_model, serialize_model, ActivationKind, Ensemble, LossRegistry, Network, SampleSet, SpecBuilder,
    TrainConfig,
};

pub const X_MIN: f64 = -3.0;
pub const X_MAX: f64 = 3.0;

pub fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Values of a scalar activation and its derivative on `xs`. Softmax has
/// no scalar form and yields `None`.
pub fn activation_curve(name: &str, alpha: f64, xs: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let kind = ActivationKind::from_name(name)?;
    let act = Activation::new(ActivationSpec { kind, alpha });
    let d = act.derivative(xs)?;
    Some((act.apply(xs), d))
}

pub fn target(name: &str, x: f64) -> Option<f64> {
    Some(match name {
        "sine" => x.sin(),
        "step" => {
            if x < 0.0 {
                -0.5
            } else {
                0.5
            }
        }
        "bump" => (-x * x).exp(),
        "abs" => x.abs() - 1.0,
        _ => return None,
    })
}

/// A small 1 -> width -> ... -> 1 regressor trained on a sampled curve.
pub struct CurveFit {
    net: Network,
    data: SampleSet,
    config: TrainConfig,
    epochs_run: usize,
    history: Vec<f64>,
}

impl CurveFit {
    pub fn new(target_name: &str, hidden: usize, width: usize, samples: usize, seed: u64) -> Result<Self, String> {
        if hidden == 0 || width == 0 || samples < 2 {
            return Err("need at least one hidden layer, one unit and two samples".into());
        }
        let xs = grid(samples, X_MIN, X_MAX);
        let ys = xs
            .iter()
            .map(|&x| target(target_name, x).map(|y| vec![y]))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| format!("unknown target `{target_name}`"))?;
        let data = SampleSet::new(xs.iter().map(|&x| vec![x]).collect(), ys).map_err(|e| e.to_string())?;
        let mut builder = SpecBuilder::new(1);
        for _ in 0..hidden {
            builder = builder.dense(width, ActivationKind::Tanh);
        }
        let spec = builder.dense(1, ActivationKind::Linear).build(seed);
        let net = Network::from_spec(&spec).map_err(|e| e.to_string())?;
        let config = TrainConfig {
            learning_rate: 0.05,
            epochs: 1,
            batch_size: 8,
            loss_name: "mse".into(),
            seed,
            shuffle: true,
        };
        Ok(Self {
            net,
            data,
            config,
            epochs_run: 0,
            history: Vec::new(),
        })
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    /// Runs `epochs` more epochs and returns the latest epoch loss.
    pub fn train(&mut self, epochs: usize) -> Result<f64, String> {
        let registry = LossRegistry::new();
        for _ in 0..epochs {
            // a fresh shuffle seed per epoch keeps incremental runs reproducible
            let cfg = TrainConfig {
                seed: self.config.seed.wrapping_add(self.epochs_run as u64),
                ..self.config.clone()
            };
            let losses = fit(&mut self.net, &self.data, &cfg, &registry).map_err(|e| e.to_string())?;
            self.history.extend(losses);
            self.epochs_run += 1;
        }
        Ok(self.history.last().copied().unwrap_or(f64::NAN))
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs_run
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn samples(&self) -> (Vec<f64>, Vec<f64>) {
        let xs = self.data.inputs().iter().map(|v| v[0]).collect();
        let ys = self.data.targets().iter().map(|v| v[0]).collect();
        (xs, ys)
    }

    pub fn predict(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.net.predict(&[x]).map_or(f64::NAN, |y| y[0])).collect()
    }

    /// Prediction of `members` copies of the current network, each fed
    /// its own noisy input, averaged. Call `i` uses grid point `i`.
    pub fn ensemble_predict(&self, xs: &[f64], members: usize, noise: f64, seed: u64) -> Result<Vec<f64>, String> {
        let ens = Ensemble::new(vec![self.net.clone(); members], noise, seed).map_err(|e| e.to_string())?;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| ens.predict_at(&[x], i as u64).map(|y| y[0]).map_err(|e| e.to_string()))
            .collect()
    }

    pub fn model_text(&self) -> Result<String, String> {
        let spec = self.net.to_spec().map_err(|e| e.to_string())?;
        serialize_model(&spec).map_err(|e| e.to_string())
    }
}

/// One-line description of a model text, or the parse error.
pub fn describe_model(text: &str) -> Result<String, String> {
    let spec = parse_model(text).map_err(|e| e.to_string())?;
    let kinds: Vec<&str> = spec.layers.iter().map(|l| l.kind_name()).collect();
    Ok(format!(
        "OK {} layers, {} -> {}, {} parameters: {}",
        spec.layers.len(),
        spec.input_dim,
        spec.output_dim(),
        spec.parameter_count(),
        kinds.join(" ")
    ))
}
