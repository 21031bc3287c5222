//! Elementwise activations and their derivatives.
//!
//! Softmax is the one vector-valued activation. Its Jacobian is not exposed;
//! gradients through it are only available fused with cross-entropy.

use crate::format::{ActivationKind, ActivationSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    spec: ActivationSpec,
}

impl Activation {
    pub fn new(spec: ActivationSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> ActivationSpec {
        self.spec
    }

    pub fn kind(&self) -> ActivationKind {
        self.spec.kind
    }

    pub fn is_softmax(&self) -> bool {
        self.spec.kind == ActivationKind::Softmax
    }

    /// Applies the activation to pre-activations `z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let alpha = self.spec.alpha;
        match self.spec.kind {
            ActivationKind::Linear => z.to_vec(),
            ActivationKind::Relu => z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
            ActivationKind::LeakyRelu => z.iter().map(|&v| if v > 0.0 { v } else { alpha * v }).collect(),
            ActivationKind::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
            ActivationKind::Tanh => z.iter().map(|v| v.tanh()).collect(),
            ActivationKind::Softmax => softmax(z),
        }
    }

    /// Diagonal of the Jacobian at `z`. Returns `None` for softmax.
    pub fn derivative(&self, z: &[f64]) -> Option<Vec<f64>> {
        let alpha = self.spec.alpha;
        let d = match self.spec.kind {
            ActivationKind::Linear => vec![1.0; z.len()],
            ActivationKind::Relu => z.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect(),
            ActivationKind::LeakyRelu => z.iter().map(|&v| if v > 0.0 { 1.0 } else { alpha }).collect(),
            ActivationKind::Sigmoid => z
                .iter()
                .map(|&v| {
                    let s = sigmoid(v);
                    s * (1.0 - s)
                })
                .collect(),
            ActivationKind::Tanh => z
                .iter()
                .map(|v| {
                    let t = v.tanh();
                    1.0 - t * t
                })
                .collect(),
            ActivationKind::Softmax => return None,
        };
        Some(d)
    }
}

fn sigmoid(v: f64) -> f64 {
    // split on sign so exp never overflows
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn act(kind: ActivationKind, alpha: f64) -> Activation {
        Activation::new(ActivationSpec { kind, alpha })
    }

    fn central_difference(a: &Activation, z: f64) -> f64 {
        let h = 1e-6;
        (a.apply(&[z + h])[0] - a.apply(&[z - h])[0]) / (2.0 * h)
    }

    #[test]
    fn leaky_relu_negative_branch() {
        assert_eq!(act(ActivationKind::LeakyRelu, 0.4).apply(&[-1.0]), [-0.4]);
    }

    #[test]
    fn leaky_relu_limits() {
        let z = [-2.0, -0.5, 0.0, 0.7, 3.0];
        assert_eq!(act(ActivationKind::LeakyRelu, 1.0).apply(&z), act(ActivationKind::Linear, 0.0).apply(&z));
        assert_eq!(act(ActivationKind::LeakyRelu, 0.0).apply(&z), act(ActivationKind::Relu, 0.0).apply(&z));
    }

    #[test]
    fn softmax_has_no_standalone_derivative() {
        assert!(act(ActivationKind::Softmax, 0.0).derivative(&[1.0]).is_none());
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        let a = act(ActivationKind::Sigmoid, 0.0);
        let y = a.apply(&[-800.0, 800.0]);
        assert_eq!(y, [0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(
            kind in prop::sample::select(vec![
                ActivationKind::Linear,
                ActivationKind::Relu,
                ActivationKind::LeakyRelu,
                ActivationKind::Sigmoid,
                ActivationKind::Tanh,
            ]),
            alpha in 0.0f64..=1.0,
            z in -5.0f64..5.0,
        ) {
            prop_assume!(z.abs() >= 1e-3);
            let a = act(kind, alpha);
            let analytic = a.derivative(&[z]).unwrap()[0];
            let numeric = central_difference(&a, z);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            prop_assert!(err <= 1e-6, "{kind:?} z={z} analytic={analytic} numeric={numeric}");
        }

        #[test]
        fn softmax_is_a_simplex_and_shift_invariant(
            // spread kept below ~36 so no component rounds to 0 or 1
            z in prop::collection::vec(-15.0f64..15.0, 1..12),
            c in -100.0f64..100.0,
        ) {
            let p = softmax(&z);
            prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0 || z.len() == 1 && v == 1.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
