use super::Tensor;
use crate::error::{Error, Result};

/// Output of [`softmax_xent`].
#[derive(Debug, Clone)]
pub struct XentOutput {
    /// Mean negative log-likelihood over the batch.
    pub loss: f64,
    /// Row-wise softmax, `[N][K]`.
    pub probs: Tensor,
    /// Gradient of `loss` with respect to the logits: `(probs - onehot) / N`.
    pub grad: Tensor,
}

/// Numerically stable row-wise softmax.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.expect_rank("softmax", 2)?;
    let k = logits.dim(1);
    let mut probs = logits.clone();
    for row in probs.data_mut().chunks_mut(k.max(1)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(probs)
}

pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<XentOutput> {
    logits.expect_rank("softmax_xent", 2)?;
    let (n, k) = (logits.dim(0), logits.dim(1));
    if k < 2 {
        return Err(Error::Shape {
            op: "softmax_xent (K >= 2)",
            expected: vec![n, 2],
            got: logits.shape().to_vec(),
        });
    }
    if labels.len() != n {
        return Err(Error::Shape {
            op: "softmax_xent labels",
            expected: vec![n],
            got: vec![labels.len()],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Index { index: bad, len: k });
    }
    let probs = softmax(logits)?;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (i, &label) in labels.iter().enumerate() {
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        grad.data_mut()[i * k + label] -= 1.0;
    }
    let inv = 1.0 / n as f64;
    grad.data_mut().iter_mut().for_each(|g| *g *= inv);
    Ok(XentOutput {
        loss: loss * inv,
        probs,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::random_tensor;

    #[test]
    fn uniform_logits() {
        let out = softmax_xent(&Tensor::full(&[1, 7], 0.3), &[4]).unwrap();
        for p in out.probs.data() {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
        assert!((out.loss - 7f64.ln()).abs() < 1e-12);
        assert!((out.loss - 1.9459).abs() < 1e-4);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let logits = Tensor::from_vec(&[1, 2], vec![1000.0, 0.0]).unwrap();
        let out = softmax_xent(&logits, &[0]).unwrap();
        assert!(out.loss.is_finite() && out.loss >= 0.0);
        assert!((out.probs.data()[0] - 1.0).abs() < 1e-15);
        assert!(out.probs.data()[1] < 1e-300);
        let out = softmax_xent(&logits, &[1]).unwrap();
        assert!((out.loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            softmax_xent(&Tensor::zeros(&[1, 3]), &[3]),
            Err(Error::Index { index: 3, len: 3 })
        ));
        assert!(softmax_xent(&Tensor::zeros(&[1, 1]), &[0]).is_err());
    }

    #[test]
    fn gradient_is_probs_minus_onehot() {
        for seed in 0..20 {
            let logits = random_tensor(&[1, 7], seed);
            let label = seed as usize % 7;
            let out = softmax_xent(&logits, &[label]).unwrap();
            for j in 0..7 {
                let analytic = out.probs.data()[j] - if j == label { 1.0 } else { 0.0 };
                assert_eq!(out.grad.data()[j], analytic);
                let h = 1e-5;
                let mut up = logits.clone();
                up.data_mut()[j] += h;
                let mut dn = logits.clone();
                dn.data_mut()[j] -= h;
                let fd = (softmax_xent(&up, &[label]).unwrap().loss - softmax_xent(&dn, &[label]).unwrap().loss)
                    / (2.0 * h);
                assert!((fd - analytic).abs() <= 1e-6, "seed {seed} j {j}: {fd} vs {analytic}");
            }
        }
    }
}
