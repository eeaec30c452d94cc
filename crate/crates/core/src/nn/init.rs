use rand::Rng;

use super::Tensor;
use crate::seed;

/// He-style uniform init: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
pub fn he_uniform(shape: &[usize], fan_in: usize, seed: u64) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    let mut rng = seed::rng(seed, "init", 0);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}
