//! Loss functions and a name-keyed registry for user-supplied ones.
//!
//! A loss carries its own derivative. Most losses differentiate with
//! respect to the network output; cross-entropy instead returns the
//! gradient with respect to the pre-softmax logits, which is what
//! [`GradientTarget`] records.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::activation::softmax;
use crate::gradcheck;

/// Lower clamp applied to probabilities before taking their log.
pub const LOG_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("loss shape mismatch: y_true has {y_true} values, y_pred has {y_pred}")]
    ShapeMismatch { y_true: usize, y_pred: usize },
    #[error("loss domain error: {0}")]
    Domain(String),
    #[error("loss `{0}` is already registered")]
    DuplicateName(String),
    #[error("unknown loss `{0}`")]
    UnknownLoss(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientTarget {
    NetworkOutput,
    PresoftmaxLogits,
}

pub type LossFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
pub type DLossFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type TargetCheck = fn(&[f64]) -> Result<(), LossError>;

fn check_shapes(y_true: &[f64], y_pred: &[f64]) -> Result<(), LossError> {
    if y_true.len() != y_pred.len() || y_pred.is_empty() {
        return Err(LossError::ShapeMismatch {
            y_true: y_true.len(),
            y_pred: y_pred.len(),
        });
    }
    Ok(())
}

fn non_negative_targets(y_true: &[f64]) -> Result<(), LossError> {
    match y_true.iter().find(|&&v| v < 0.0) {
        Some(v) => Err(LossError::Domain(format!("negative target probability {v}"))),
        None => Ok(()),
    }
}

/// Mean squared error `(1/n)·Σ(y_pred − y_true)²`.
pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, LossError> {
    check_shapes(y_true, y_pred)?;
    Ok(raw_mse(y_true, y_pred))
}

/// `(2/n)·(y_pred − y_true)`.
pub fn d_mse(y_true: &[f64], y_pred: &[f64]) -> Result<Vec<f64>, LossError> {
    check_shapes(y_true, y_pred)?;
    Ok(raw_d_mse(y_true, y_pred))
}

/// `−Σ y_true·log(max(y_pred, 1e-15))`.
pub fn crossentropy(y_true: &[f64], y_pred: &[f64]) -> Result<f64, LossError> {
    check_shapes(y_true, y_pred)?;
    non_negative_targets(y_true)?;
    Ok(raw_crossentropy(y_true, y_pred))
}

/// Gradient of cross-entropy with respect to the softmax input:
/// `y_pred − y_true`.
pub fn d_crossentropy(y_true: &[f64], y_pred: &[f64]) -> Result<Vec<f64>, LossError> {
    check_shapes(y_true, y_pred)?;
    non_negative_targets(y_true)?;
    Ok(raw_d_crossentropy(y_true, y_pred))
}

fn raw_mse(y_true: &[f64], y_pred: &[f64]) -> f64 {
    let n = y_pred.len() as f64;
    y_pred.iter().zip(y_true).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

fn raw_d_mse(y_true: &[f64], y_pred: &[f64]) -> Vec<f64> {
    let scale = 2.0 / y_pred.len() as f64;
    y_pred.iter().zip(y_true).map(|(p, t)| scale * (p - t)).collect()
}

fn raw_crossentropy(y_true: &[f64], y_pred: &[f64]) -> f64 {
    -y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| t * p.max(LOG_CLAMP).ln())
        .sum::<f64>()
}

fn raw_d_crossentropy(y_true: &[f64], y_pred: &[f64]) -> Vec<f64> {
    y_pred.iter().zip(y_true).map(|(p, t)| p - t).collect()
}

/// A scalar loss paired with its derivative.
#[derive(Clone)]
pub struct LossFunction {
    name: String,
    loss: Arc<LossFn>,
    d_loss: Arc<DLossFn>,
    target: GradientTarget,
    target_check: Option<TargetCheck>,
}

impl fmt::Debug for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossFunction")
            .field("name", &self.name)
            .field("target", &self.target)
            .finish_non_exhaustive()
    }
}

impl LossFunction {
    pub fn new(
        name: impl Into<String>,
        loss: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        d_loss: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        target: GradientTarget,
    ) -> Self {
        Self {
            name: name.into(),
            loss: Arc::new(loss),
            d_loss: Arc::new(d_loss),
            target,
            target_check: None,
        }
    }

    pub fn mse() -> Self {
        Self::new("mse", raw_mse, raw_d_mse, GradientTarget::NetworkOutput)
    }

    pub fn crossentropy() -> Self {
        Self {
            target_check: Some(non_negative_targets),
            ..Self::new(
                "crossentropy",
                raw_crossentropy,
                raw_d_crossentropy,
                GradientTarget::PresoftmaxLogits,
            )
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn gradient_target(&self) -> GradientTarget {
        self.target
    }

    fn check(&self, y_true: &[f64], y_pred: &[f64]) -> Result<(), LossError> {
        check_shapes(y_true, y_pred)?;
        if let Some(check) = self.target_check {
            check(y_true)?;
        }
        Ok(())
    }

    pub fn loss(&self, y_true: &[f64], y_pred: &[f64]) -> Result<f64, LossError> {
        self.check(y_true, y_pred)?;
        Ok((self.loss)(y_true, y_pred))
    }

    /// Derivative seed for backprop, taken with respect to whatever
    /// [`gradient_target`](Self::gradient_target) names.
    pub fn d_loss(&self, y_true: &[f64], y_pred: &[f64]) -> Result<Vec<f64>, LossError> {
        self.check(y_true, y_pred)?;
        let d = (self.d_loss)(y_true, y_pred);
        if d.len() != y_pred.len() {
            return Err(LossError::ShapeMismatch {
                y_true: y_pred.len(),
                y_pred: d.len(),
            });
        }
        Ok(d)
    }
}

/// Losses selectable by name. Starts with `mse` and `crossentropy`.
#[derive(Debug, Clone)]
pub struct LossRegistry {
    losses: BTreeMap<String, LossFunction>,
}

impl Default for LossRegistry {
    fn default() -> Self {
        let mut losses = BTreeMap::new();
        for f in [LossFunction::mse(), LossFunction::crossentropy()] {
            losses.insert(f.name.clone(), f);
        }
        Self { losses }
    }
}

impl LossRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        loss: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        d_loss: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        target: GradientTarget,
    ) -> Result<(), LossError> {
        self.insert(LossFunction::new(name, loss, d_loss, target))
    }

    pub fn insert(&mut self, function: LossFunction) -> Result<(), LossError> {
        if self.losses.contains_key(&function.name) {
            return Err(LossError::DuplicateName(function.name));
        }
        self.losses.insert(function.name.clone(), function);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<LossFunction, LossError> {
        self.losses
            .get(name)
            .cloned()
            .ok_or_else(|| LossError::UnknownLoss(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.losses.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LossFunction> {
        self.losses.values()
    }
}

/// Compares a loss's derivative with central finite differences of its
/// scalar value and returns the largest relative error.
///
/// For [`GradientTarget::NetworkOutput`] `point` is the prediction. For
/// [`GradientTarget::PresoftmaxLogits`] `point` is the logit vector and
/// the loss is differentiated through a softmax.
pub fn check_loss_gradient(loss: &LossFunction, y_true: &[f64], point: &[f64]) -> Result<f64, LossError> {
    match loss.target {
        GradientTarget::NetworkOutput => {
            let analytic = loss.d_loss(y_true, point)?;
            let numeric = gradcheck::gradient(
                |p| loss.loss(y_true, p).unwrap_or(f64::NAN),
                point,
                gradcheck::FD_STEP,
            );
            Ok(gradcheck::max_relative_error(&analytic, &numeric))
        }
        GradientTarget::PresoftmaxLogits => {
            let analytic = loss.d_loss(y_true, &softmax(point))?;
            let numeric = gradcheck::gradient(
                |z| loss.loss(y_true, &softmax(z)).unwrap_or(f64::NAN),
                point,
                gradcheck::FD_STEP,
            );
            Ok(gradcheck::max_relative_error(&analytic, &numeric))
        }
    }
}
