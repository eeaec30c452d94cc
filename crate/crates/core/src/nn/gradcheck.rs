//! Finite-difference gradient checks for [`Layer`] implementations.

use rand::Rng;

use super::{Layer, Mode, Tensor};
use crate::seed;

/// Tensor with entries uniform in `[-1, 1]`.
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = seed::rng(seed, "gradcheck", 0);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

#[derive(Debug, Clone)]
pub struct GradReport {
    /// Largest norm-wise relative error over the input and all parameters.
    pub max_rel_error: f64,
    pub input_rel_error: f64,
    pub param_rel_errors: Vec<f64>,
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / norm(a).max(norm(b)).max(1e-300)
}

fn projected_loss<L: Layer + Clone>(layer: &L, x: &Tensor, r: &Tensor, mode: Mode) -> f64 {
    let mut fresh = layer.clone();
    fresh.forward(x, mode).expect("forward").dot(r)
}

/// Compares analytic gradients of `sum(r * layer(x))` against central differences.
///
/// Every evaluation runs on a fresh clone of `layer`, so stateful layers such as
/// dropout see the same randomness each time.
pub fn check_layer<L: Layer + Clone>(layer: &L, x: &Tensor, mode: Mode, h: f64, seed: u64) -> GradReport {
    let mut analytic = layer.clone();
    for p in analytic.params_mut() {
        p.zero_grad();
        p.grad_mut();
    }
    let y = analytic.forward(x, mode).expect("forward");
    let r = random_tensor(y.shape(), seed ^ 0x5eed);
    let dx = analytic.backward(&r).expect("backward");

    let mut fd_x = vec![0.0; x.len()];
    for (i, g) in fd_x.iter_mut().enumerate() {
        let mut up = x.clone();
        up.data_mut()[i] += h;
        let mut dn = x.clone();
        dn.data_mut()[i] -= h;
        *g = (projected_loss(layer, &up, &r, mode) - projected_loss(layer, &dn, &r, mode)) / (2.0 * h);
    }
    let input_rel_error = rel_error(dx.data(), &fd_x);

    let analytic_grads: Vec<Vec<f64>> = analytic
        .params_mut()
        .into_iter()
        .map(|p| p.grad().map(<[f64]>::to_vec).unwrap_or_default())
        .collect();
    let mut param_rel_errors = Vec::with_capacity(analytic_grads.len());
    let mut probe = layer.clone();
    let n_params = probe.params_mut().len();
    for (pi, grad) in analytic_grads.iter().enumerate().take(n_params) {
        let len = grad.len();
        let mut fd = vec![0.0; len];
        for (j, g) in fd.iter_mut().enumerate() {
            let mut up = layer.clone();
            up.params_mut()[pi].data_mut()[j] += h;
            let mut dn = layer.clone();
            dn.params_mut()[pi].data_mut()[j] -= h;
            *g = (projected_loss(&up, x, &r, mode) - projected_loss(&dn, x, &r, mode)) / (2.0 * h);
        }
        param_rel_errors.push(rel_error(grad, &fd));
    }
    let max_rel_error = param_rel_errors.iter().copied().fold(input_rel_error, f64::max);
    GradReport {
        max_rel_error,
        input_rel_error,
        param_rel_errors,
    }
}
