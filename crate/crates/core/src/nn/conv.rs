use serde::{Deserialize, Serialize};

use super::gemm::gemm;
use super::init;
use super::{Layer, Mode, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Padding {
    /// Zero-pad so that stride-1 output matches the input size.
    Same,
    Valid,
}

/// 2-D cross-correlation over `[N][C_in][H][W]` with kernels `[C_out][C_in][kh][kw]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Tensor,
    /// `None` for convolutions whose output is re-centred anyway (e.g. by batch norm).
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub padding: Padding,
    input: Option<Tensor>,
}

struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad_top: usize,
    pad_left: usize,
    out_h: usize,
    out_w: usize,
    stride: usize,
}

impl Geometry {
    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Unfolds one sample `[C_in][H][W]` into the `[K][P]` block of `col`
    /// whose rows are `ld` apart.
    fn im2col(&self, x: &[f64], col: &mut [f64], ld: usize) {
        for ci in 0..self.c_in {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = ((ci * self.kh + i) * self.kw + j) * ld;
                    for oy in 0..self.out_h {
                        let y = (oy * self.stride + i) as isize - self.pad_top as isize;
                        let dst = &mut col[row + oy * self.out_w..row + (oy + 1) * self.out_w];
                        if y < 0 || y >= self.h as isize {
                            dst.fill(0.0);
                            continue;
                        }
                        let src = &x[(ci * self.h + y as usize) * self.w..][..self.w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let xx = (ox * self.stride + j) as isize - self.pad_left as isize;
                            *d = if xx < 0 || xx >= self.w as isize {
                                0.0
                            } else {
                                src[xx as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Geometry::im2col`]: accumulates a `[K][P]` block back into `[C_in][H][W]`.
    fn col2im(&self, col: &[f64], ld: usize, dx: &mut [f64]) {
        for ci in 0..self.c_in {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = ((ci * self.kh + i) * self.kw + j) * ld;
                    for oy in 0..self.out_h {
                        let y = (oy * self.stride + i) as isize - self.pad_top as isize;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        let dst = &mut dx[(ci * self.h + y as usize) * self.w..][..self.w];
                        let src = &col[row + oy * self.out_w..row + (oy + 1) * self.out_w];
                        for (ox, s) in src.iter().enumerate() {
                            let xx = (ox * self.stride + j) as isize - self.pad_left as isize;
                            if xx >= 0 && xx < self.w as isize {
                                dst[xx as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

impl Conv2d {
    pub fn new(c_in: usize, c_out: usize, kernel: (usize, usize), stride: usize, padding: Padding, seed: u64) -> Self {
        let (kh, kw) = kernel;
        let weight = init::he_uniform(&[c_out, c_in, kh, kw], c_in * kh * kw, seed);
        Self {
            weight: weight.param(),
            bias: Some(Tensor::zeros(&[c_out]).param()),
            stride: stride.max(1),
            padding,
            input: None,
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = None;
        self
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }

    /// Output `(H', W')` for an `H x W` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let g = self.geometry(self.weight.dim(1), h, w)?;
        Ok((g.out_h, g.out_w))
    }

    fn geometry(&self, c_in: usize, h: usize, w: usize) -> Result<Geometry> {
        let ws = self.weight.shape();
        let (kh, kw) = (ws[2], ws[3]);
        if c_in != ws[1] {
            return Err(Error::Shape {
                op: "conv2d",
                expected: vec![ws[1], h, w],
                got: vec![c_in, h, w],
            });
        }
        let (pad_h, pad_w) = match self.padding {
            Padding::Same => (kh - 1, kw - 1),
            Padding::Valid => (0, 0),
        };
        if kh > h + pad_h || kw > w + pad_w {
            return Err(Error::Shape {
                op: "conv2d",
                expected: vec![c_in, kh, kw],
                got: vec![c_in, h, w],
            });
        }
        Ok(Geometry {
            c_in,
            h,
            w,
            kh,
            kw,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
            out_h: (h + pad_h - kh) / self.stride + 1,
            out_w: (w + pad_w - kw) / self.stride + 1,
            stride: self.stride,
        })
    }
}

/// Largest im2col buffer, in values, built at once (512 KiB of f64, so it stays in cache).
const COL_BUDGET: usize = 1 << 16;

/// Samples unfolded together so each gemm is wide without exceeding the budget.
fn group_size(k: usize, p: usize, n: usize) -> usize {
    (COL_BUDGET / (k * p).max(1)).clamp(1, n.max(1))
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        x.expect_rank("conv2d", 4)?;
        let [n, c_in, h, w] = [x.dim(0), x.dim(1), x.dim(2), x.dim(3)];
        let g = self.geometry(c_in, h, w)?;
        let c_out = self.out_channels();
        let (k, p) = (g.k(), g.p());
        let mut out = Tensor::zeros(&[n, c_out, g.out_h, g.out_w]);
        let sample = c_in * h * w;
        let group = group_size(k, p, n);
        let mut col = vec![0.0; k * p * group];
        let mut res = vec![0.0; c_out * p * group];
        for first in (0..n).step_by(group.max(1)) {
            let gs = group.min(n - first);
            let ld = gs * p;
            for s in 0..gs {
                let src = &x.data()[(first + s) * sample..][..sample];
                g.im2col(src, &mut col[s * p..], ld);
            }
            gemm(c_out, k, ld, self.weight.data(), false, &col, false, &mut res, 0.0);
            let dst = &mut out.data_mut()[first * c_out * p..][..gs * c_out * p];
            for co in 0..c_out {
                let b = self.bias.as_ref().map_or(0.0, |b| b.data()[co]);
                for s in 0..gs {
                    let from = &res[co * ld + s * p..][..p];
                    let to = &mut dst[(s * c_out + co) * p..][..p];
                    to.iter_mut().zip(from).for_each(|(t, f)| *t = f + b);
                }
            }
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| Error::Data("conv2d backward before forward".into()))?;
        let [n, c_in, h, w] = [x.dim(0), x.dim(1), x.dim(2), x.dim(3)];
        let g = self.geometry(c_in, h, w)?;
        let c_out = self.out_channels();
        dy.expect_shape("conv2d backward", &[n, c_out, g.out_h, g.out_w])?;
        let (k, p) = (g.k(), g.p());
        let sample = c_in * h * w;
        let mut dx = Tensor::zeros(x.shape());
        let group = group_size(k, p, n);
        let mut col = vec![0.0; k * p * group];
        let mut dcol = vec![0.0; k * p * group];
        let mut dyg = vec![0.0; c_out * p * group];
        let weight = self.weight.data().to_vec();
        for first in (0..n).step_by(group.max(1)) {
            let gs = group.min(n - first);
            let ld = gs * p;
            for s in 0..gs {
                g.im2col(&x.data()[(first + s) * sample..][..sample], &mut col[s * p..], ld);
                for co in 0..c_out {
                    let from = &dy.data()[((first + s) * c_out + co) * p..][..p];
                    dyg[co * ld + s * p..][..p].copy_from_slice(from);
                }
            }
            gemm(c_out, ld, k, &dyg, false, &col, true, self.weight.grad_mut(), 1.0);
            if let Some(bias) = &mut self.bias {
                let db = bias.grad_mut();
                for (co, row) in dyg[..c_out * ld].chunks(ld).enumerate() {
                    db[co] += row.iter().sum::<f64>();
                }
            }
            gemm(k, c_out, ld, &weight, true, &dyg, false, &mut dcol, 0.0);
            for s in 0..gs {
                let dst = &mut dx.data_mut()[(first + s) * sample..][..sample];
                g.col2im(&dcol[s * p..], ld, dst);
            }
        }
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }

    fn state(&self) -> Vec<(&'static str, &Tensor)> {
        std::iter::once(("weight", &self.weight))
            .chain(self.bias.as_ref().map(|b| ("bias", b)))
            .collect()
    }

    fn state_mut(&mut self) -> Vec<&mut Tensor> {
        self.params_mut()
    }
}

/// 2x2 max pooling with stride 2; gradient goes to the first maximal entry.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2d {
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
}

impl MaxPool2d {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for MaxPool2d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        x.expect_rank("maxpool2d", 4)?;
        let [n, c, h, w] = [x.dim(0), x.dim(1), x.dim(2), x.dim(3)];
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::Shape {
                op: "maxpool2d (even H and W)",
                expected: vec![n, c, h + h % 2, w + w % 2],
                got: x.shape().to_vec(),
            });
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        self.argmax = vec![0; n * c * oh * ow];
        let src = x.data();
        let mut o = 0;
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    out.data_mut()[o] = src[best];
                    self.argmax[o] = best;
                    o += 1;
                }
            }
        }
        self.in_shape = x.shape().to_vec();
        Ok(out)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        if dy.len() != self.argmax.len() {
            return Err(Error::Shape {
                op: "maxpool2d backward",
                expected: vec![self.argmax.len()],
                got: dy.shape().to_vec(),
            });
        }
        let mut dx = Tensor::zeros(&self.in_shape);
        for (g, &i) in dy.data().iter().zip(&self.argmax) {
            dx.data_mut()[i] += g;
        }
        Ok(dx)
    }
}
