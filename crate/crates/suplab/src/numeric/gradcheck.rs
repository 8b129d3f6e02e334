//! Central-difference gradient estimation. Every analytic gradient in the
//! crate is validated against this; the losses themselves are plain closures
//! over a flat parameter slice.

/// Central-difference gradient of `loss` at `params` with step `h`.
pub fn finite_difference_gradient<F>(loss: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    debug_assert!(h > 0.0);
    let mut scratch = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = scratch[i];
        scratch[i] = orig + h;
        let up = loss(&scratch);
        scratch[i] = orig - h;
        let down = loss(&scratch);
        scratch[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Largest relative discrepancy between two gradients, with a floor so that
/// near-zero entries compare absolutely.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    debug_assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / f64::max(floor, f64::max(a.abs(), n.abs())))
        .fold(0.0, f64::max)
}
