//! CNN-TCN gesture classifier, the frame-only CNN baseline and training.

mod network;
mod train;

pub use network::{CnnTcnConfig, FrameModel, Model, ModelKind};
pub use train::{
    accuracy, batch_tensor, cnn_baseline, predict, predict_batch, train, EpochStats, Example, Prediction,
    TrainConfig, TrainOutcome, TrainSplit,
};
