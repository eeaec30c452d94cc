//! Minimal batched neural-network layers with hand-written backward passes.

mod activation;
mod adam;
mod conv;
mod dense;
mod gemm;
pub mod gradcheck;
pub mod init;
mod loss;
mod norm;
mod temporal;
mod tensor;

pub use activation::{Dropout, LeakyRelu, LEAKY_SLOPE};
pub use adam::{adam_step, AdamHyper, AdamState};
pub use conv::{Conv2d, MaxPool2d, Padding};
pub use dense::Dense;
pub use loss::{softmax, softmax_xent, XentOutput};
pub use norm::{BatchNorm, BN_EPS, BN_MOMENTUM};
pub use temporal::{reduced_channels, CausalConv1d, Pointwise};
pub use tensor::Tensor;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A differentiable layer. `backward` must follow the `forward` whose output
/// it differentiates; parameter gradients are accumulated, not overwritten.
pub trait Layer {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor>;

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor>;

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }

    /// Named persistent tensors (parameters plus buffers), in serialization order.
    fn state(&self) -> Vec<(&'static str, &Tensor)> {
        Vec::new()
    }

    /// Mutable view of [`Layer::state`], same order.
    fn state_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}
