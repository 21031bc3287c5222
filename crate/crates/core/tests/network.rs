mod common;

use common::*;
use fkb_core::gradcheck::{self, FD_STEP};
use fkb_core::losses::crossentropy;
use fkb_core::network::NetworkError;
use fkb_core::rng::{self, PolarGaussian};
use fkb_core::{ActivationKind, ActivationSpec, LossFunction, Mode, ModelSpec, Network, SpecBuilder};

fn param_fd(spec: &ModelSpec, x: &[f64], loss: impl Fn(&[f64]) -> f64, params: &[f64]) -> Vec<f64> {
    let mut net = Network::from_spec(spec).unwrap();
    gradcheck::gradient(
        |p| {
            for (i, v) in p.iter().enumerate() {
                *net.parameter_mut(i).unwrap() = *v;
            }
            loss(&net.predict(x).unwrap())
        },
        params,
        FD_STEP,
    )
}

#[test]
fn softmax_crossentropy_gradient_matches_finite_differences() {
    let spec = SpecBuilder::new(4)
        .dense(6, ActivationKind::Tanh)
        .batchnorm(1e-3)
        .dense(3, ActivationKind::Softmax)
        .build(11);
    let mut spec = spec;
    perturb_batchnorm(&mut spec, 12);
    let x = [0.3, -1.2, 0.8, 0.05];
    let target = [0.2, 0.7, 0.1];

    let mut net = Network::from_spec(&spec).unwrap();
    assert_eq!(net.loss().name(), "crossentropy");
    net.set_mode(Mode::Training);
    net.forward(&x).unwrap();
    let (_, dx) = net.backprop_to_input(&target).unwrap();
    let params = net.parameters();
    let fd = param_fd(&spec, &x, |y| crossentropy(&target, y).unwrap(), &params);
    assert!(gradcheck::max_relative_error(&net.gradients(), &fd) <= 1e-6);

    let reference = Network::from_spec(&spec).unwrap();
    let fd_x = gradcheck::gradient(|p| crossentropy(&target, &reference.predict(p).unwrap()).unwrap(), &x, FD_STEP);
    assert!(gradcheck::max_relative_error(&dx, &fd_x) <= 1e-6);
}

#[test]
fn random_smooth_networks_pass_gradient_checks() {
    let mut stream = rng::stream(77);
    let mut gauss = PolarGaussian::new();
    for seed in 0..20 {
        let mut spec = SpecBuilder::new(3)
            .dense(5, ActivationKind::Sigmoid)
            .batchnorm(1e-2)
            .dropout(0.0)
            .dense(4, ActivationSpec::leaky_relu(0.3))
            .dense(2, ActivationKind::Linear)
            .build(seed);
        perturb_batchnorm(&mut spec, seed + 100);
        let x = gaussian_vec(&mut stream, &mut gauss, 3);
        let y = gaussian_vec(&mut stream, &mut gauss, 2);
        let mut net = Network::from_spec(&spec).unwrap();
        net.set_mode(Mode::Training);
        net.forward(&x).unwrap();
        net.backprop(&y).unwrap();
        let params = net.parameters();
        let fd = param_fd(&spec, &x, |p| fkb_core::losses::mse(&y, p).unwrap(), &params);
        let err = gradcheck::max_relative_error(&net.gradients(), &fd);
        assert!(err <= 1e-6, "seed {seed}: {err:e}");
    }
}

#[test]
fn predict_is_shareable_across_threads() {
    let spec = case_study_spec(4, 128, 0.1, true, 0.2, 3);
    let net = Network::from_spec(&spec).unwrap();
    let x = vec![0.5; 94];
    let expected = bits(&net.predict(&x).unwrap());
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| assert_eq!(bits(&net.predict(&x).unwrap()), expected));
        }
    });
}

#[test]
fn dropout_is_identity_at_inference() {
    let with = SpecBuilder::new(4).dense(8, ActivationKind::Relu).dropout(0.5).dense(2, ActivationKind::Linear).build(1);
    let without = SpecBuilder::new(4).dense(8, ActivationKind::Relu).dense(2, ActivationKind::Linear).build(1);
    let a = Network::from_spec(&with).unwrap();
    let b = Network::from_spec(&without).unwrap();
    let x = [1.0, -2.0, 0.5, 0.25];
    assert_eq!(bits(&a.predict(&x).unwrap()), bits(&b.predict(&x).unwrap()));
}

#[test]
fn loss_and_output_must_agree() {
    let soft = SpecBuilder::new(2).dense(3, ActivationKind::Softmax).build(0);
    let plain = SpecBuilder::new(2).dense(3, ActivationKind::Linear).build(0);
    let mut a = Network::from_spec(&soft).unwrap();
    let mut b = Network::from_spec(&plain).unwrap();
    assert!(matches!(a.set_loss(LossFunction::mse()), Err(NetworkError::LossConfig(_))));
    assert!(matches!(b.set_loss(LossFunction::crossentropy()), Err(NetworkError::LossConfig(_))));
}

#[test]
fn dimension_errors_are_reported() {
    let net = Network::from_spec(&SpecBuilder::new(3).dense(2, ActivationKind::Linear).build(0)).unwrap();
    assert!(matches!(
        net.predict(&[1.0]),
        Err(NetworkError::DimensionMismatch { expected: 3, found: 1 })
    ));
}
