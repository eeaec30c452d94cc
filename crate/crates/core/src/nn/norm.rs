use super::{Layer, Mode, Tensor};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Per-channel batch normalisation over `[N][C][...]`.
///
/// Train mode normalises with the batch statistics and folds them into the
/// running estimates (`running = 0.9 * running + 0.1 * batch`); eval mode uses
/// the running estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    shape: Vec<usize>,
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    train: bool,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], 1.0).param(),
            beta: Tensor::zeros(&[channels]).param(),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            cache: None,
        }
    }

    fn channels(&self) -> usize {
        self.gamma.len()
    }
}

fn layout(x: &Tensor, channels: usize) -> Result<(usize, usize)> {
    if x.shape().len() < 2 || x.dim(1) != channels {
        let mut expected = x.shape().to_vec();
        if expected.len() >= 2 {
            expected[1] = channels;
        }
        return Err(Error::Shape {
            op: "batchnorm",
            expected,
            got: x.shape().to_vec(),
        });
    }
    let inner: usize = x.shape()[2..].iter().product();
    Ok((x.dim(0), inner))
}

impl Layer for BatchNorm {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let c = self.channels();
        let (n, inner) = layout(x, c)?;
        let count = n * inner;
        let train = mode == Mode::Train;
        if train && count < 2 {
            return Err(Error::Size(format!(
                "batchnorm in train mode needs >= 2 values per channel, got {count}"
            )));
        }
        let src = x.data();
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        if train {
            for b in 0..n {
                for ch in 0..c {
                    let off = (b * c + ch) * inner;
                    mean[ch] += src[off..off + inner].iter().sum::<f64>();
                }
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            for b in 0..n {
                for ch in 0..c {
                    let off = (b * c + ch) * inner;
                    var[ch] += src[off..off + inner].iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= count as f64);
            let unbias = count as f64 / (count as f64 - 1.0);
            for ch in 0..c {
                let rm = &mut self.running_mean.data_mut()[ch];
                *rm = BN_MOMENTUM * *rm + (1.0 - BN_MOMENTUM) * mean[ch];
                let rv = &mut self.running_var.data_mut()[ch];
                *rv = BN_MOMENTUM * *rv + (1.0 - BN_MOMENTUM) * var[ch] * unbias;
            }
        } else {
            mean.copy_from_slice(self.running_mean.data());
            var.copy_from_slice(self.running_var.data());
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut x_hat = vec![0.0; x.len()];
        let mut out = Tensor::zeros(x.shape());
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * inner;
                let (g, be) = (self.gamma.data()[ch], self.beta.data()[ch]);
                for i in off..off + inner {
                    let xh = (src[i] - mean[ch]) * inv_std[ch];
                    x_hat[i] = xh;
                    out.data_mut()[i] = g * xh + be;
                }
            }
        }
        self.cache = Some(Cache {
            shape: x.shape().to_vec(),
            x_hat,
            inv_std,
            train,
        });
        Ok(out)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| Error::Data("batchnorm backward before forward".into()))?;
        dy.expect_shape("batchnorm backward", &cache.shape)?;
        let c = self.channels();
        let n = cache.shape[0];
        let inner: usize = cache.shape[2..].iter().product();
        let count = (n * inner) as f64;
        let g = dy.data();
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * inner;
                for i in off..off + inner {
                    sum_dy[ch] += g[i];
                    sum_dy_xhat[ch] += g[i] * cache.x_hat[i];
                }
            }
        }
        for ch in 0..c {
            self.gamma.grad_mut()[ch] += sum_dy_xhat[ch];
            self.beta.grad_mut()[ch] += sum_dy[ch];
        }
        let mut dx = Tensor::zeros(&cache.shape);
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * inner;
                let scale = self.gamma.data()[ch] * cache.inv_std[ch];
                for i in off..off + inner {
                    dx.data_mut()[i] = if cache.train {
                        scale * (g[i] - sum_dy[ch] / count - cache.x_hat[i] * sum_dy_xhat[ch] / count)
                    } else {
                        scale * g[i]
                    };
                }
            }
        }
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("gamma", &self.gamma),
            ("beta", &self.beta),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ]
    }

    fn state_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.gamma,
            &mut self.beta,
            &mut self.running_mean,
            &mut self.running_var,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_layer, random_tensor};

    #[test]
    fn train_output_is_standardised() {
        let mut bn = BatchNorm::new(3);
        let mut x = random_tensor(&[4, 3, 5, 5], 7);
        // Scaled so that eps/(var + eps) stays below 1e-6.
        x.data_mut().iter_mut().for_each(|v| *v *= 10.0);
        let y = bn.forward(&x, Mode::Train).unwrap();
        let inner = 25;
        for ch in 0..3 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|b| y.data()[(b * 3 + ch) * inner..(b * 3 + ch + 1) * inner].to_vec())
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() <= 1e-10);
            assert!((v - 1.0).abs() <= 1e-6, "{v}");
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let mut bn = BatchNorm::new(2);
        bn.beta.data_mut().copy_from_slice(&[0.3, -1.2]);
        let mut x = Tensor::zeros(&[2, 2, 3, 3]);
        for b in 0..2 {
            for i in 0..9 {
                x.data_mut()[(b * 2) * 9 + i] = 5.0;
                x.data_mut()[(b * 2 + 1) * 9 + i] = -2.0;
            }
        }
        let y = bn.forward(&x, Mode::Train).unwrap();
        for b in 0..2 {
            for i in 0..9 {
                assert_eq!(y.data()[(b * 2) * 9 + i], 0.3);
                assert_eq!(y.data()[(b * 2 + 1) * 9 + i], -1.2);
            }
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm::new(1);
        let x = Tensor::from_vec(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean.data()[0] - 0.25).abs() < 1e-15);
        // unbiased variance 5/3
        assert!((bn.running_var.data()[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-15);
        let y = bn.forward(&x, Mode::Eval).unwrap();
        let s = (bn.running_var.data()[0] + BN_EPS).sqrt();
        assert!((y.data()[0] - (1.0 - 0.25) / s).abs() < 1e-12);
    }

    #[test]
    fn single_value_train_is_rejected() {
        let mut bn = BatchNorm::new(1);
        assert!(bn.forward(&Tensor::zeros(&[1, 1]), Mode::Train).is_err());
        assert!(bn.forward(&Tensor::zeros(&[1, 1]), Mode::Eval).is_ok());
    }

    #[test]
    fn batchnorm_gradcheck() {
        for seed in 0..20 {
            let mut bn = BatchNorm::new(3);
            bn.gamma = random_tensor(&[3], 50 + seed).param();
            bn.beta = random_tensor(&[3], 80 + seed).param();
            let x = random_tensor(&[2, 3, 4, 4], seed);
            for mode in [Mode::Train, Mode::Eval] {
                let r = check_layer(&bn, &x, mode, 1e-5, seed);
                assert!(r.max_rel_error <= 1e-4, "seed {seed} {mode:?}: {r:?}");
            }
        }
    }
}
