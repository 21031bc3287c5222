//! Central finite differences for checking hand-written derivatives.
//!
//! Only forward evaluations are used here, so these helpers stay
//! independent of every backward pass they are used to check.

pub const FD_STEP: f64 = 1e-6;

/// Gradients smaller than this are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Central difference of `f` with respect to coordinate `i` of `x`.
pub fn partial(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], i: usize, step: f64) -> f64 {
    let mut probe = x.to_vec();
    probe[i] = x[i] + step;
    let plus = f(&probe);
    probe[i] = x[i] - step;
    let minus = f(&probe);
    (plus - minus) / (2.0 * step)
}

/// Full central-difference gradient of `f` at `x`.
pub fn gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len()).map(|i| partial(&mut f, x, i, step)).collect()
}

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Largest [`relative_error`] over paired components.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient lengths differ");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}
