use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers, one per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(hyper: AdamHyper, sizes: &[usize]) -> Self {
        Self {
            hyper,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(hyper: AdamHyper, params: &[&mut Tensor]) -> Self {
        let sizes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(hyper, &sizes)
    }

    /// One bias-corrected Adam update using each tensor's gradient buffer.
    pub fn update(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Shape {
                op: "adam (parameter count)",
                expected: vec![self.m.len()],
                got: vec![params.len()],
            });
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != self.m[i].len() {
                return Err(Error::Shape {
                    op: "adam (buffer size)",
                    expected: vec![self.m[i].len()],
                    got: p.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let AdamHyper { lr, beta1, beta2, eps } = self.hyper;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let (value, grad) = p.value_and_grad_mut();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..value.len() {
                let g = grad[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                value[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Functional form: returns the updated parameters and state.
pub fn adam_step(params: &[Tensor], grads: &[Tensor], state: &AdamState) -> Result<(Vec<Tensor>, AdamState)> {
    if params.len() != grads.len() {
        return Err(Error::Shape {
            op: "adam_step",
            expected: vec![params.len()],
            got: vec![grads.len()],
        });
    }
    let mut owned: Vec<Tensor> = Vec::with_capacity(params.len());
    for (p, g) in params.iter().zip(grads) {
        g.expect_shape("adam_step gradient", p.shape())?;
        let mut t = p.clone();
        t.grad_mut().copy_from_slice(g.data());
        owned.push(t);
    }
    let mut next = state.clone();
    let mut refs: Vec<&mut Tensor> = owned.iter_mut().collect();
    next.update(&mut refs)?;
    Ok((owned, next))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let p = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let g = Tensor::from_vec(&[1], vec![0.3]).unwrap();
        let state = AdamState::new(AdamHyper::default(), &[1]);
        let (next, st) = adam_step(&[p], &[g], &state).unwrap();
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let want = 1.0 - 5e-4 * 0.3 / (0.3 + 1e-8);
        assert!((next[0].data()[0] - want).abs() < 1e-15);
        assert!((next[0].data()[0] - (1.0 - 5e-4)).abs() < 1e-10);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::from_vec(&[3], vec![0.5, -2.0, 7.0]).unwrap().param();
        let before = p.clone();
        let mut st = AdamState::new(AdamHyper::default(), &[3]);
        for _ in 0..10 {
            st.update(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.data(), before.data());
        assert_eq!(st.step, 10);
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut p = Tensor::from_vec(&[2], vec![0.5, -2.0]).unwrap().param();
        p.grad_mut().copy_from_slice(&[1.0, -3.0]);
        let mut st = AdamState::new(AdamHyper { lr: 0.0, ..Default::default() }, &[2]);
        st.update(&mut [&mut p]).unwrap();
        assert_eq!(p.data(), &[0.5, -2.0]);
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut p = Tensor::from_vec(&[2], vec![0.1, 0.2]).unwrap().param();
            let mut st = AdamState::new(AdamHyper::default(), &[2]);
            let mut traj = vec![];
            for k in 0..50 {
                let g = [(k as f64 * 0.3).sin(), p.data()[0] * p.data()[1]];
                p.grad_mut().copy_from_slice(&g);
                st.update(&mut [&mut p]).unwrap();
                traj.push(p.data().to_vec());
            }
            traj
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let state = AdamState::new(AdamHyper::default(), &[2]);
        let p = Tensor::zeros(&[3]);
        assert!(adam_step(&[p.clone()], &[p.clone()], &state).is_err());
        assert!(adam_step(&[Tensor::zeros(&[2])], &[Tensor::zeros(&[3])], &state).is_err());
    }
}
