use super::gemm::gemm;
use super::init;
use super::{Layer, Mode, Tensor};
use crate::error::{Error, Result};

/// Channel count after reducing `channels` to one twelfth, rounded up.
pub fn reduced_channels(channels: usize) -> usize {
    channels.div_ceil(12).max(1)
}

/// Pointwise (1x1) convolution over `[N][C][L]`: a linear map across channels
/// applied independently at every position.
#[derive(Debug, Clone)]
pub struct Pointwise {
    pub weight: Tensor,
    pub bias: Tensor,
    input: Option<Tensor>,
}

impl Pointwise {
    pub fn new(c_in: usize, c_out: usize, seed: u64) -> Self {
        Self {
            weight: init::he_uniform(&[c_out, c_in], c_in, seed).param(),
            bias: Tensor::zeros(&[c_out]).param(),
            input: None,
        }
    }

    /// The 1/12 channel reduction used after the frame convolutions.
    pub fn channel_reduce(c_in: usize, seed: u64) -> Self {
        Self::new(c_in, reduced_channels(c_in), seed)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }
}

impl Layer for Pointwise {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        x.expect_rank("pointwise", 3)?;
        let (n, c, l) = (x.dim(0), x.dim(1), x.dim(2));
        if c != self.in_channels() {
            return Err(Error::Shape {
                op: "pointwise",
                expected: vec![n, self.in_channels(), l],
                got: x.shape().to_vec(),
            });
        }
        let co = self.out_channels();
        let mut out = Tensor::zeros(&[n, co, l]);
        for (s, dst) in out.data_mut().chunks_mut(co * l).enumerate() {
            for (o, row) in dst.chunks_mut(l).enumerate() {
                row.fill(self.bias.data()[o]);
            }
            gemm(co, c, l, self.weight.data(), false, &x.data()[s * c * l..(s + 1) * c * l], false, dst, 1.0);
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| Error::Data("pointwise backward before forward".into()))?;
        let (n, c, l) = (x.dim(0), x.dim(1), x.dim(2));
        let co = self.out_channels();
        dy.expect_shape("pointwise backward", &[n, co, l])?;
        let weight = self.weight.data().to_vec();
        let mut dx = Tensor::zeros(x.shape());
        for s in 0..n {
            let dy_s = &dy.data()[s * co * l..(s + 1) * co * l];
            let x_s = &x.data()[s * c * l..(s + 1) * c * l];
            gemm(co, l, c, dy_s, false, x_s, true, self.weight.grad_mut(), 1.0);
            let db = self.bias.grad_mut();
            for (o, row) in dy_s.chunks(l).enumerate() {
                db[o] += row.iter().sum::<f64>();
            }
            gemm(c, co, l, &weight, true, dy_s, false, &mut dx.data_mut()[s * c * l..(s + 1) * c * l], 0.0);
        }
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn state_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Dilated causal convolution over `[N][C_in][T]`, weights `[C_out][C_in][k]`.
///
/// The input is left-padded with `(k-1)*d` zeros, so `y[t]` reads
/// `x[t - (k-1-j)*d]` through tap `j`; the last tap sees the current step.
#[derive(Debug, Clone)]
pub struct CausalConv1d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub dilation: usize,
    input: Option<Tensor>,
}

impl CausalConv1d {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, dilation: usize, seed: u64) -> Result<Self> {
        if kernel < 1 || dilation < 1 {
            return Err(Error::Param(format!(
                "causal conv needs kernel >= 1 and dilation >= 1, got {kernel} and {dilation}"
            )));
        }
        Ok(Self {
            weight: init::he_uniform(&[c_out, c_in, kernel], c_in * kernel, seed).param(),
            bias: Tensor::zeros(&[c_out]).param(),
            dilation,
            input: None,
        })
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim(2)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }

    /// Number of past steps (inclusive of the current one) each output sees.
    pub fn receptive_field(&self) -> usize {
        (self.kernel() - 1) * self.dilation + 1
    }
}

impl Layer for CausalConv1d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        x.expect_rank("causal_conv1d", 3)?;
        let (n, c, t) = (x.dim(0), x.dim(1), x.dim(2));
        if c != self.in_channels() {
            return Err(Error::Shape {
                op: "causal_conv1d",
                expected: vec![n, self.in_channels(), t],
                got: x.shape().to_vec(),
            });
        }
        let (co, k, d) = (self.out_channels(), self.kernel(), self.dilation);
        let w = self.weight.data();
        let mut out = Tensor::zeros(&[n, co, t]);
        let y = out.data_mut();
        for s in 0..n {
            for o in 0..co {
                let row = &mut y[(s * co + o) * t..(s * co + o + 1) * t];
                row.fill(self.bias.data()[o]);
                for i in 0..c {
                    let xs = &x.data()[(s * c + i) * t..(s * c + i + 1) * t];
                    for j in 0..k {
                        let lag = (k - 1 - j) * d;
                        let wv = w[(o * c + i) * k + j];
                        for step in lag..t {
                            row[step] += wv * xs[step - lag];
                        }
                    }
                }
            }
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| Error::Data("causal_conv1d backward before forward".into()))?;
        let (n, c, t) = (x.dim(0), x.dim(1), x.dim(2));
        let (co, k, d) = (self.out_channels(), self.kernel(), self.dilation);
        dy.expect_shape("causal_conv1d backward", &[n, co, t])?;
        let w = self.weight.data().to_vec();
        let mut dx = Tensor::zeros(x.shape());
        for s in 0..n {
            for o in 0..co {
                let g = &dy.data()[(s * co + o) * t..(s * co + o + 1) * t];
                self.bias.grad_mut()[o] += g.iter().sum::<f64>();
                for i in 0..c {
                    let xs = &x.data()[(s * c + i) * t..(s * c + i + 1) * t];
                    for j in 0..k {
                        let lag = (k - 1 - j) * d;
                        let widx = (o * c + i) * k + j;
                        let mut acc = 0.0;
                        for step in lag..t {
                            acc += g[step] * xs[step - lag];
                        }
                        self.weight.grad_mut()[widx] += acc;
                        let dxs = &mut dx.data_mut()[(s * c + i) * t..(s * c + i + 1) * t];
                        for step in lag..t {
                            dxs[step - lag] += w[widx] * g[step];
                        }
                    }
                }
            }
        }
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn state_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}
