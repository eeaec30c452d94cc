use rand::Rng;

use super::{Layer, Mode, Tensor};
use crate::error::{Error, Result};
use crate::seed;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub slope: f64,
    input: Option<Tensor>,
}

impl Default for LeakyRelu {
    fn default() -> Self {
        Self::new(LEAKY_SLOPE)
    }
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        Self { slope, input: None }
    }
}

impl Layer for LeakyRelu {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor> {
        let mut y = x.clone();
        for v in y.data_mut() {
            if *v < 0.0 {
                *v *= self.slope;
            }
        }
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| Error::Data("leaky_relu backward before forward".into()))?;
        dy.expect_shape("leaky_relu backward", x.shape())?;
        let mut dx = dy.clone();
        for (g, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
            if xv < 0.0 {
                *g *= self.slope;
            }
        }
        Ok(dx)
    }
}

/// Inverted dropout: survivors are scaled by `1/(1-p)` so eval mode is the identity.
///
/// The mask of the `k`-th training call is drawn from sub-stream `("dropout", k)`
/// of `seed`.
#[derive(Debug, Clone)]
pub struct Dropout {
    p: f64,
    seed: u64,
    calls: u64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Param(format!("dropout probability {p} outside [0, 1)")));
        }
        Ok(Self {
            p,
            seed,
            calls: 0,
            mask: None,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.calls = 0;
    }
}

impl Layer for Dropout {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if mode == Mode::Eval || self.p == 0.0 {
            self.mask = None;
            return Ok(x.clone());
        }
        let mut rng = seed::rng(self.seed, "dropout", self.calls);
        self.calls += 1;
        let keep = 1.0 / (1.0 - self.p);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<f64>() < self.p { 0.0 } else { keep })
            .collect();
        let mut y = x.clone();
        y.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        self.mask = Some(mask);
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let mut dx = dy.clone();
        if let Some(mask) = &self.mask {
            if mask.len() != dy.len() {
                return Err(Error::Shape {
                    op: "dropout backward",
                    expected: vec![mask.len()],
                    got: dy.shape().to_vec(),
                });
            }
            dx.data_mut().iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
        }
        Ok(dx)
    }
}
