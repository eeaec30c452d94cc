use proptest::prelude::*;
use rand::Rng;
use rfdm_core::dsp::{RfdmSequence, ScaleMode};
use rfdm_core::gesture::{GestureClass, NUM_CLASSES};
use rfdm_core::model::{
    cnn_baseline, predict, predict_batch, train, CnnTcnConfig, Example, Model, ModelKind, TrainConfig, TrainSplit,
};
use rfdm_core::nn::gradcheck::{check_layer, random_tensor};
use rfdm_core::nn::{Layer, Mode, Tensor};
use rfdm_core::{seed, Error};

fn small_cfg() -> CnnTcnConfig {
    CnnTcnConfig {
        frames: 8,
        height: 8,
        width: 16,
        ..CnnTcnConfig::default()
    }
}

fn random_sequence(shape: [usize; 3], seed: u64) -> RfdmSequence {
    let mut rng = seed::rng(seed, "test-seq", 0);
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random::<f64>()).collect();
    RfdmSequence::from_data(shape, data, ScaleMode::LinearMaxnorm).unwrap()
}

fn one_per_class(cfg: &CnnTcnConfig, seed: u64) -> Vec<Example> {
    GestureClass::ALL
        .iter()
        .enumerate()
        .map(|(i, &label)| Example {
            seq: random_sequence([cfg.frames, cfg.height, cfg.width], seed + i as u64),
            label,
        })
        .collect()
}

fn all_indices(n: usize) -> TrainSplit {
    TrainSplit {
        train: (0..n).collect(),
        val: Vec::new(),
    }
}

fn eval_loss(model: &Model, data: &[Example]) -> f64 {
    let idx: Vec<usize> = (0..data.len()).collect();
    let preds = predict_batch(model, data, &idx).unwrap();
    -preds
        .iter()
        .zip(data)
        .map(|(p, ex)| p.probs[ex.label.index()].ln())
        .sum::<f64>()
        / data.len() as f64
}

#[test]
fn default_feature_length_is_384() {
    let cfg = CnnTcnConfig::default();
    assert_eq!(cfg.reduced_channels(), 6);
    assert_eq!(cfg.frame_map_hw(), (8, 8));
    assert_eq!(cfg.feature_len(), 384);
    let mut m = Model::new(ModelKind::CnnTcn, cfg, 0).unwrap();
    let x = Tensor::zeros(&[1, 16, 32, 32]);
    assert_eq!(m.frame_embeddings(&x, Mode::Eval).unwrap().shape(), &[1, 16, 384]);
    assert_eq!(m.forward(&x, Mode::Eval).unwrap().shape(), &[1, NUM_CLASSES]);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        CnnTcnConfig {
            dilations: vec![1, 4, 2],
            ..Default::default()
        },
        CnnTcnConfig {
            height: 30,
            ..Default::default()
        },
        CnnTcnConfig {
            conv_widths: vec![],
            ..Default::default()
        },
        CnnTcnConfig {
            dropout: 1.0,
            ..Default::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(Model::new(ModelKind::CnnTcn, cfg, 0), Err(Error::Config(_))));
    }
}

#[test]
fn wrong_input_shape_is_a_shape_error() {
    let mut m = Model::new(ModelKind::CnnTcn, CnnTcnConfig::tiny(), 0).unwrap();
    let err = m.forward(&Tensor::zeros(&[1, 4, 8, 6]), Mode::Eval).unwrap_err();
    assert!(matches!(err, Error::Shape { .. }), "{err}");
    let seq = random_sequence([5, 8, 8], 0);
    assert!(matches!(predict(&m, &seq), Err(Error::Shape { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn composed_shapes_match_shape_algebra(
        frames in 1usize..6,
        hq in 1usize..4,
        wq in 1usize..4,
        widths in prop::collection::vec(1usize..20, 1..4),
        n in 1usize..3,
        cnn in any::<bool>(),
    ) {
        let pooled = widths.len().min(2);
        let div = 1 << pooled;
        let cfg = CnnTcnConfig {
            frames,
            height: hq * div,
            width: wq * div,
            conv_widths: widths.clone(),
            pooled_blocks: pooled,
            ..Default::default()
        };
        let kind = if cnn { ModelKind::Cnn } else { ModelKind::CnnTcn };
        let mut m = Model::new(kind, cfg.clone(), 3).unwrap();
        let x = random_tensor(&[n, frames, cfg.height, cfg.width], 1);
        let emb = m.frame_embeddings(&x, Mode::Eval).unwrap();
        prop_assert_eq!(emb.shape(), &[n, frames, cfg.feature_len()]);
        prop_assert_eq!(cfg.feature_len(), widths.last().unwrap().div_ceil(12) * hq * wq);
        let logits = m.forward(&x, Mode::Eval).unwrap();
        prop_assert_eq!(logits.shape(), &[n, NUM_CLASSES]);
        // Batch statistics need at least two values per channel.
        if n * frames * hq * wq >= 2 {
            let trained = m.forward(&x, Mode::Train).unwrap();
            prop_assert_eq!(trained.shape(), &[n, NUM_CLASSES]);
        }
        if !cnn {
            for out in m.temporal_outputs(&x, Mode::Eval).unwrap() {
                prop_assert_eq!(out.shape(), &[n, cfg.tcn_width(), frames]);
            }
        }
    }
}

#[test]
fn frame_parameters_are_shared_across_time() {
    let cfg = small_cfg();
    let mut m = Model::new(ModelKind::CnnTcn, cfg.clone(), 5).unwrap();
    let ptrs = m.frame_param_ptrs();
    // Bias-free conv plus batch-norm scale and shift per block, then the reduction.
    assert_eq!(ptrs.len(), 3 * cfg.conv_widths.len() + 2);
    let mut unique = ptrs.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), ptrs.len());

    // The same frame at different time steps yields the same embedding.
    let frame = random_tensor(&[cfg.height * cfg.width], 9);
    let mut x = random_tensor(&[1, cfg.frames, cfg.height, cfg.width], 2);
    let hw = cfg.height * cfg.width;
    for t in [1, 6] {
        x.data_mut()[t * hw..(t + 1) * hw].copy_from_slice(frame.data());
    }
    let emb = m.frame_embeddings(&x, Mode::Eval).unwrap();
    let f = cfg.feature_len();
    assert_eq!(emb.data()[f..2 * f], emb.data()[6 * f..7 * f]);
}

#[test]
fn zero_frames_give_identical_features() {
    let cfg = small_cfg();
    let mut m = Model::new(ModelKind::CnnTcn, cfg.clone(), 1).unwrap();
    let mut x = random_tensor(&[1, cfg.frames, cfg.height, cfg.width], 4);
    let hw = cfg.height * cfg.width;
    for t in [0, 3] {
        x.data_mut()[t * hw..(t + 1) * hw].fill(0.0);
    }
    let emb = m.frame_embeddings(&x, Mode::Eval).unwrap();
    let f = cfg.feature_len();
    assert_eq!(emb.data()[..f], emb.data()[3 * f..4 * f]);
}

#[test]
fn features_are_local() {
    let cfg = CnnTcnConfig {
        frames: 1,
        ..CnnTcnConfig::default()
    };
    let mut m = Model::new(ModelKind::CnnTcn, cfg.clone(), 2).unwrap();
    let x = random_tensor(&[1, 1, 32, 32], 3);
    let mut y = x.clone();
    // Far corner: outside the receptive field of feature position (0, 0).
    y.data_mut()[32 * 32 - 1] += 5.0;
    let a = m.frame_embeddings(&x, Mode::Eval).unwrap();
    let b = m.frame_embeddings(&y, Mode::Eval).unwrap();
    let (h, w) = cfg.frame_map_hw();
    for c in 0..cfg.reduced_channels() {
        let unit = c * h * w;
        assert_eq!(a.data()[unit], b.data()[unit], "channel {c}");
    }
    assert_ne!(a.data(), b.data());
}

#[test]
fn temporal_blocks_are_causal() {
    let cfg = small_cfg();
    let mut m = Model::new(ModelKind::CnnTcn, cfg.clone(), 7).unwrap();
    let x = random_tensor(&[1, cfg.frames, cfg.height, cfg.width], 11);
    let full = m.temporal_outputs(&x, Mode::Eval).unwrap();
    let hw = cfg.height * cfg.width;
    for t0 in 0..cfg.frames {
        let mut trunc = x.clone();
        trunc.data_mut()[t0 * hw..].fill(0.0);
        let outs = m.temporal_outputs(&trunc, Mode::Eval).unwrap();
        for (a, b) in full.iter().zip(&outs) {
            let t = cfg.frames;
            for (ra, rb) in a.data().chunks(t).zip(b.data().chunks(t)) {
                assert_eq!(ra[..t0], rb[..t0], "block output before t={t0} changed");
            }
        }
    }
}

#[test]
fn zero_conv_weights_make_logits_input_independent() {
    for kind in [ModelKind::CnnTcn, ModelKind::Cnn] {
        let cfg = small_cfg();
        let mut m = Model::new(kind, cfg.clone(), 8).unwrap();
        m.zero_conv_weights();
        let a = m.forward(&random_tensor(&[2, cfg.frames, 8, 16], 1), Mode::Eval).unwrap();
        let b = m.forward(&random_tensor(&[2, cfg.frames, 8, 16], 2), Mode::Eval).unwrap();
        assert_eq!(a.data(), b.data());
    }
}

#[test]
fn end_to_end_gradcheck_on_tiny_config() {
    for kind in [ModelKind::CnnTcn, ModelKind::Cnn] {
        for s in 0..20 {
            let m = Model::new(kind, CnnTcnConfig::tiny(), 100 + s).unwrap();
            let x = random_tensor(&[2, 4, 8, 8], s);
            let r = check_layer(&m, &x, Mode::Train, 1e-5, s);
            assert!(r.max_rel_error <= 1e-4, "{kind} seed {s}: {r:?}");
        }
    }
}

#[test]
fn baseline_has_fewer_parameters() {
    for cfg in [CnnTcnConfig::default(), small_cfg()] {
        let tcn = Model::new(ModelKind::CnnTcn, cfg.clone(), 0).unwrap().param_count();
        let cnn = Model::new(ModelKind::Cnn, cfg, 0).unwrap().param_count();
        assert!(cnn < tcn, "{cnn} vs {tcn}");
    }
}

#[test]
fn predictions_are_deterministic_probabilities() {
    let cfg = small_cfg();
    let m = Model::new(ModelKind::CnnTcn, cfg.clone(), 3).unwrap();
    let seq = random_sequence([cfg.frames, cfg.height, cfg.width], 1);
    let a = predict(&m, &seq).unwrap();
    let b = predict(&m, &seq).unwrap();
    assert_eq!(a, b);
    assert!((a.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    assert!(a.probs.iter().all(|p| (0.0..=1.0).contains(p)));

    let mut z = m.clone();
    z.zero_output_layer();
    for p in predict(&z, &seq).unwrap().probs {
        assert!((p - 1.0 / 7.0).abs() < 1e-15);
    }
}

#[test]
fn overfits_seven_samples() {
    let cfg = small_cfg();
    let data = one_per_class(&cfg, 40);
    for kind in [ModelKind::CnnTcn, ModelKind::Cnn] {
        let tc = TrainConfig {
            lr: 2e-3,
            batch_size: 7,
            epochs: 200,
            ..Default::default()
        };
        let out = train(kind, &cfg, &data, &all_indices(7), &tc).unwrap();
        assert_eq!(out.steps, 200);
        let idx: Vec<usize> = (0..7).collect();
        let preds = predict_batch(&out.model, &data, &idx).unwrap();
        let hits = preds.iter().zip(&data).filter(|(p, ex)| p.class == ex.label).count();
        assert_eq!(hits, 7, "{kind}");
        let final_loss = out.curve.last().unwrap().train_loss;
        assert!(final_loss < 0.01, "{kind}: loss {final_loss}");
        // The returned checkpoint is the first epoch that memorised the set.
        assert!(eval_loss(&out.model, &data) < 7f64.ln());
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = CnnTcnConfig::tiny();
    let data: Vec<Example> = (0..3).flat_map(|k| one_per_class(&cfg, 10 * k)).collect();
    let split = TrainSplit {
        train: (0..14).collect(),
        val: (14..21).collect(),
    };
    let tc = TrainConfig {
        batch_size: 4,
        epochs: 5,
        seed: 9,
        ..Default::default()
    };
    let a = train(ModelKind::CnnTcn, &cfg, &data, &split, &tc).unwrap();
    let b = train(ModelKind::CnnTcn, &cfg, &data, &split, &tc).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.best_epoch, b.best_epoch);
    let sa: Vec<Vec<f64>> = a.model.named_state().iter().map(|(_, t)| t.data().to_vec()).collect();
    let sb: Vec<Vec<f64>> = b.model.named_state().iter().map(|(_, t)| t.data().to_vec()).collect();
    assert_eq!(sa, sb);

    let c = cnn_baseline(&cfg, &data, &split, &tc).unwrap();
    let d = cnn_baseline(&cfg, &data, &split, &tc).unwrap();
    assert_eq!(c.curve, d.curve);

    // Presenting the training indices in a different order changes nothing.
    let mut shuffled = split.clone();
    shuffled.train.reverse();
    shuffled.train.swap(0, 5);
    let e = train(ModelKind::CnnTcn, &cfg, &data, &shuffled, &tc).unwrap();
    assert_eq!(a.curve, e.curve);
    assert_eq!(a.best_epoch, e.best_epoch);
}

#[test]
fn best_epoch_is_the_earliest_maximum() {
    let cfg = CnnTcnConfig::tiny();
    let data: Vec<Example> = (0..2).flat_map(|k| one_per_class(&cfg, 50 * k)).collect();
    let split = TrainSplit {
        train: (0..7).collect(),
        val: (7..14).collect(),
    };
    let tc = TrainConfig {
        batch_size: 7,
        epochs: 12,
        ..Default::default()
    };
    let out = train(ModelKind::CnnTcn, &cfg, &data, &split, &tc).unwrap();
    let best = out.curve.iter().map(|e| e.val_acc).fold(f64::NEG_INFINITY, f64::max);
    let first = out.curve.iter().position(|e| e.val_acc == best).unwrap();
    assert_eq!(out.best_epoch, first);
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let cfg = CnnTcnConfig {
        dropout: 0.0,
        ..CnnTcnConfig::tiny()
    };
    let data = one_per_class(&cfg, 3);
    let tc = TrainConfig {
        lr: 0.0,
        batch_size: 7,
        epochs: 4,
        seed: 2,
        ..Default::default()
    };
    for kind in [ModelKind::CnnTcn, ModelKind::Cnn] {
        let out = train(kind, &cfg, &data, &all_indices(7), &tc).unwrap();
        let mut init = Model::new(kind, cfg.clone(), seed::derive(2, "init", 0)).unwrap();
        let mut trained = out.model.clone();
        let a: Vec<Vec<f64>> = init.params_mut().iter().map(|t| t.data().to_vec()).collect();
        let b: Vec<Vec<f64>> = trained.params_mut().iter().map(|t| t.data().to_vec()).collect();
        assert_eq!(a, b);
        let first = out.curve[0].train_loss;
        assert!(out.curve.iter().all(|e| e.train_loss == first), "{:?}", out.curve);
    }
}

#[test]
fn missing_class_is_a_data_error() {
    let cfg = CnnTcnConfig::tiny();
    let data = one_per_class(&cfg, 0);
    let split = TrainSplit {
        train: (0..6).collect(),
        val: vec![],
    };
    let err = train(ModelKind::CnnTcn, &cfg, &data, &split, &TrainConfig::default()).unwrap_err();
    match err {
        Error::Data(msg) => assert!(msg.contains(GestureClass::ALL[6].name()), "{msg}"),
        other => panic!("unexpected {other}"),
    }
}
