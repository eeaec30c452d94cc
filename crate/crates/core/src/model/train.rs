use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{CnnTcnConfig, Model, ModelKind};
use crate::dsp::RfdmSequence;
use crate::error::{Error, Result};
use crate::gesture::{GestureClass, NUM_CLASSES};
use crate::nn::{softmax, softmax_xent, AdamHyper, AdamState, Layer, Mode, Tensor};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is accepted: it freezes the parameters, which is useful as a control run.
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be >= 1 when set".into()));
        }
        Ok(())
    }
}

/// A conditioned sequence with its class label.
#[derive(Debug, Clone)]
pub struct Example {
    pub seq: RfdmSequence,
    pub label: GestureClass,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainSplit {
    pub train: Vec<usize>,
    /// Used for checkpoint selection; when empty the training set is scored instead.
    pub val: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy.
    pub model: Model,
    /// Index into `curve` (epochs count from 0).
    pub best_epoch: usize,
    pub curve: Vec<EpochStats>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: GestureClass,
    pub probs: Vec<f64>,
}

/// Stacks sequences into a `[N][T][H][W]` batch, checking each against `shape`.
pub fn batch_tensor(data: &[Example], indices: &[usize], shape: [usize; 3]) -> Result<Tensor> {
    let per: usize = shape.iter().product();
    let mut buf = Vec::with_capacity(indices.len() * per);
    for &i in indices {
        let ex = data.get(i).ok_or(Error::Index { index: i, len: data.len() })?;
        let got = ex.seq.shape();
        if got != shape {
            return Err(Error::Shape {
                op: "sequence vs model input",
                expected: shape.to_vec(),
                got: got.to_vec(),
            });
        }
        buf.extend_from_slice(&ex.seq.data);
    }
    Tensor::from_vec(&[indices.len(), shape[0], shape[1], shape[2]], buf)
}

fn check_classes(data: &[Example], train: &[usize]) -> Result<()> {
    let mut seen = [false; NUM_CLASSES];
    for &i in train {
        let ex = data.get(i).ok_or(Error::Index { index: i, len: data.len() })?;
        seen[ex.label.index()] = true;
    }
    if let Some(missing) = GestureClass::ALL.iter().find(|c| !seen[c.index()]) {
        return Err(Error::Data(format!("training split has no samples of class {missing}")));
    }
    Ok(())
}

const EVAL_CHUNK: usize = 64;

/// Eval-mode class probabilities for the given samples, in order.
pub fn predict_batch(model: &Model, data: &[Example], indices: &[usize]) -> Result<Vec<Prediction>> {
    let mut m = model.clone();
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_CHUNK) {
        let x = batch_tensor(data, chunk, m.input_shape())?;
        let probs = softmax(&m.forward(&x, Mode::Eval)?)?;
        for row in probs.data().chunks(NUM_CLASSES) {
            out.push(Prediction {
                class: GestureClass::from_index(argmax(row))?,
                probs: row.to_vec(),
            });
        }
    }
    Ok(out)
}

/// Single-sequence inference.
pub fn predict(model: &Model, seq: &RfdmSequence) -> Result<Prediction> {
    let ex = Example {
        seq: seq.clone(),
        label: GestureClass::ALL[0],
    };
    Ok(predict_batch(model, std::slice::from_ref(&ex), &[0])?.remove(0))
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(model: &Model, data: &[Example], indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(0.0);
    }
    let preds = predict_batch(model, data, indices)?;
    let hits = preds.iter().zip(indices).filter(|(p, &i)| p.class == data[i].label).count();
    Ok(hits as f64 / indices.len() as f64)
}

/// Mini-batch Adam training with best-validation checkpoint selection.
///
/// The training indices are sorted before the per-epoch shuffle (sub-stream
/// `("shuffle", epoch)` of the seed), so the result does not depend on the
/// order of `split.train`. Ties in validation accuracy keep the earlier epoch.
pub fn train(
    kind: ModelKind,
    model_cfg: &CnnTcnConfig,
    data: &[Example],
    split: &TrainSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    check_classes(data, &split.train)?;
    let mut model = Model::new(kind, model_cfg.clone(), seed::derive(cfg.seed, "init", 0))?;
    let shape = model.input_shape();
    // Reject mismatched inputs before spending any compute.
    for &i in split.train.iter().chain(&split.val) {
        batch_tensor(data, &[i], shape)?;
    }

    let hyper = AdamHyper {
        lr: cfg.lr,
        ..AdamHyper::default()
    };
    let mut opt = AdamState::for_params(hyper, &model.params_mut());
    let mut order = split.train.clone();
    order.sort_unstable();
    let score_set: Vec<usize> = if split.val.is_empty() { order.clone() } else { split.val.clone() };

    let mut best: Option<(f64, usize, Model)> = None;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut since_best = 0;
    for epoch in 0..cfg.epochs {
        let mut epoch_order = order.clone();
        epoch_order.shuffle(&mut seed::rng(cfg.seed, "shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        for batch in epoch_order.chunks(cfg.batch_size) {
            // Batch membership is random; the order inside a batch is canonical
            // so reductions do not depend on the shuffle.
            let mut batch = batch.to_vec();
            batch.sort_unstable();
            let batch = batch.as_slice();
            let x = batch_tensor(data, batch, shape)?;
            let labels: Vec<usize> = batch.iter().map(|&i| data[i].label.index()).collect();
            model.zero_grad();
            let logits = model.forward(&x, Mode::Train)?;
            let out = softmax_xent(&logits, &labels)?;
            if !out.loss.is_finite() {
                return Err(Error::Data(format!("non-finite training loss at epoch {epoch}")));
            }
            model.backward(&out.grad)?;
            opt.update(&mut model.params_mut())?;
            loss_sum += out.loss * batch.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_acc = accuracy(&model, data, &score_set)?;
        curve.push(EpochStats {
            epoch,
            train_loss,
            val_acc,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        best_epoch,
        curve,
        steps: opt.step,
    })
}

/// Trains the frame-only CNN baseline under the same contract as [`train`].
pub fn cnn_baseline(
    model_cfg: &CnnTcnConfig,
    data: &[Example],
    split: &TrainSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train(ModelKind::Cnn, model_cfg, data, split, cfg)
}
