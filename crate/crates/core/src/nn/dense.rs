use super::gemm::gemm;
use super::init;
use super::{Layer, Mode, Tensor};
use crate::error::{Error, Result};

/// Affine map `[N][D_in] -> [N][D_out]`, weights `[D_out][D_in]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(d_in: usize, d_out: usize, seed: u64) -> Self {
        Self {
            weight: init::he_uniform(&[d_out, d_in], d_in, seed).param(),
            bias: Tensor::zeros(&[d_out]).param(),
            input: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_features(&self) -> usize {
        self.weight.dim(0)
    }
}

impl Layer for Dense {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        x.expect_rank("dense", 2)?;
        let (n, d) = (x.dim(0), x.dim(1));
        if d != self.in_features() {
            return Err(Error::Shape {
                op: "dense",
                expected: vec![n, self.in_features()],
                got: x.shape().to_vec(),
            });
        }
        let o = self.out_features();
        let mut out = Tensor::zeros(&[n, o]);
        for row in out.data_mut().chunks_mut(o) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(n, d, o, x.data(), false, self.weight.data(), true, out.data_mut(), 1.0);
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| Error::Data("dense backward before forward".into()))?;
        let (n, d) = (x.dim(0), x.dim(1));
        let o = self.out_features();
        dy.expect_shape("dense backward", &[n, o])?;
        gemm(o, n, d, dy.data(), true, x.data(), false, self.weight.grad_mut(), 1.0);
        let db = self.bias.grad_mut();
        for row in dy.data().chunks(o) {
            db.iter_mut().zip(row).for_each(|(b, g)| *b += g);
        }
        let mut dx = Tensor::zeros(&[n, d]);
        gemm(n, o, d, dy.data(), false, self.weight.data(), false, dx.data_mut(), 0.0);
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
