use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rfdm_core::dsp::preprocess;
use rfdm_core::eval::{make_splits_for_records, run_protocol, validation_split, EvalReport, SampleTags};
use rfdm_core::gesture::{dataset_plan, render_sample, GestureClass, NUM_CLASSES};
use rfdm_core::io::{
    confusion_csv, curve_csv, decode_checkpoint, decode_cube, decode_rfdm, encode_checkpoint, encode_cube,
    encode_rfdm, frame_csv, frame_pgm, read_verified, write_file, DatasetManifest, PayloadKind, SampleRecord,
};
use rfdm_core::model::{predict, train, EpochStats, Example};
use rfdm_core::seed::sha256_hex;
use rfdm_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::run::{FileHash, RunLog};

/// Failure of a subcommand: either bad usage or an error from the pipeline.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn class_names() -> Vec<&'static str> {
    GestureClass::ALL.iter().map(|c| c.name()).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)?;
    Ok(bytes)
}

fn dataset_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn print_counts(manifest: &DatasetManifest) {
    for (class, n) in GestureClass::ALL.iter().zip(manifest.class_counts()) {
        println!("{:<11} {n}", class.name());
    }
}

pub fn gen(cfg: &PipelineConfig, out: &Path, log: &mut RunLog) -> CliResult<()> {
    let plan = dataset_plan(&cfg.dataset, cfg.seed)?;
    let records = plan
        .par_iter()
        .map(|meta| {
            let cube = render_sample(meta, &cfg.dataset, &cfg.radar)?;
            let bytes = encode_cube(&cube)?;
            let file = format!("cubes/s{:05}.rfdc", meta.index);
            write_file(&out.join(&file), &bytes)?;
            Ok(SampleRecord::from_meta(meta, file, sha256_hex(&bytes)))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        payload: PayloadKind::Rfdc,
        master_seed: cfg.seed,
        radar: cfg.radar,
        dataset: Some(cfg.dataset.clone()),
        dsp: None,
        samples: records,
    };
    let path = out.join("manifest.json");
    write_file(&path, manifest.to_json()?.as_bytes())?;
    log.output(&path)?;
    print_counts(&manifest);
    Ok(())
}

fn read_manifest(path: &Path, payload: PayloadKind, log: &mut RunLog) -> CliResult<DatasetManifest> {
    log.input(path)?;
    let m = DatasetManifest::read(path)?;
    if m.payload != payload {
        return Err(Error::Manifest(format!(
            "{} lists {:?} payloads, this command needs {payload:?}",
            path.display(),
            m.payload
        ))
        .into());
    }
    Ok(m)
}

pub fn preprocess_cmd(cfg: &PipelineConfig, input: &Path, out: &Path, log: &mut RunLog) -> CliResult<()> {
    let src = read_manifest(input, PayloadKind::Rfdc, log)?;
    let dir = dataset_dir(input);
    let records = src
        .samples
        .par_iter()
        .map(|rec| {
            let run = || -> Result<SampleRecord> {
                let bytes = read_verified(&dir, rec)?;
                let cube = decode_cube(&bytes)?.into_cube(src.radar)?;
                let seq = preprocess(&cube, &cfg.dsp)?;
                let encoded = encode_rfdm(&seq)?;
                let file = format!("rfdm/s{:05}.rfdm", rec.index);
                write_file(&out.join(&file), &encoded)?;
                Ok(SampleRecord { file, sha256: sha256_hex(&encoded), ..rec.clone() })
            };
            run().map_err(|e| e.context(format!("sample {} ({})", rec.index, rec.file)))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        payload: PayloadKind::Rfdm,
        dsp: Some(cfg.dsp),
        samples: records,
        ..src
    };
    let path = out.join("manifest.json");
    write_file(&path, manifest.to_json()?.as_bytes())?;
    log.output(&path)?;
    println!("{} sequences, mti {}", manifest.samples.len(), if cfg.dsp.mti { "on" } else { "off" });
    Ok(())
}

/// Loads every RFDM sequence of a manifest, verifying hashes.
fn load_examples(input: &Path, log: &mut RunLog) -> CliResult<(DatasetManifest, Vec<Example>)> {
    let m = read_manifest(input, PayloadKind::Rfdm, log)?;
    let dir = dataset_dir(input);
    let examples = m
        .samples
        .par_iter()
        .map(|rec| {
            let seq = read_verified(&dir, rec)
                .and_then(|b| decode_rfdm(&b))
                .map_err(|e| e.context(format!("sample {}", rec.index)))?;
            Ok(Example { seq, label: rec.class })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((m, examples))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    model: rfdm_core::model::ModelKind,
    best_epoch: usize,
    steps: u64,
    train_samples: usize,
    val_samples: usize,
    curve: &'a [EpochStats],
}

pub fn train_cmd(cfg: &PipelineConfig, input: &Path, out: &Path, log: &mut RunLog) -> CliResult<()> {
    let (m, data) = load_examples(input, log)?;
    let tags: Vec<SampleTags> = m.samples.iter().map(SampleTags::from).collect();
    let split = validation_split(&tags, cfg.seed);
    let outcome = train(cfg.model_kind, &cfg.model, &data, &split, &cfg.train)?;
    let ckpt = out.join("model.rfnn");
    write_file(&ckpt, &encode_checkpoint(&outcome.model, None)?)?;
    let curve = out.join("curve.csv");
    write_file(&curve, curve_csv(&outcome.curve).as_bytes())?;
    let summary = out.join("train.json");
    write_json(
        &summary,
        &TrainSummary {
            model: cfg.model_kind,
            best_epoch: outcome.best_epoch,
            steps: outcome.steps,
            train_samples: split.train.len(),
            val_samples: split.val.len(),
            curve: &outcome.curve,
        },
    )?;
    for p in [&ckpt, &curve, &summary] {
        log.output(p)?;
    }
    let best = &outcome.curve[outcome.best_epoch];
    println!("best epoch {} (val acc {:.4}), checkpoint {}", outcome.best_epoch, best.val_acc, ckpt.display());
    Ok(())
}

pub fn eval_cmd(cfg: &PipelineConfig, input: &Path, out: &Path, log: &mut RunLog) -> CliResult<()> {
    let (m, data) = load_examples(input, log)?;
    let plans = make_splits_for_records(&m.samples, cfg.protocol, cfg.seed)?;
    let report = run_protocol(&data, &plans, cfg.model_kind, &cfg.model, &cfg.train)?;
    let names = class_names();
    let report_path = out.join("report.json");
    write_json(&report_path, &report)?;
    log.output(&report_path)?;
    let csv = out.join("confusion.csv");
    write_file(&csv, confusion_csv(&names, &report.confusion.rows())?.as_bytes())?;
    log.output(&csv)?;
    for (k, fold) in report.folds.iter().enumerate() {
        let p = out.join(format!("confusion-fold{k}.csv"));
        write_file(&p, confusion_csv(&names, &fold.confusion.rows())?.as_bytes())?;
        log.output(&p)?;
        println!("{:<28} {:.4}", fold.id, fold.accuracy);
    }
    println!("{} {} mean accuracy {:.4}", report.protocol, report.model, report.mean_accuracy);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionRow {
    pub file: String,
    pub predicted: GestureClass,
    pub probs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<GestureClass>,
}

pub fn infer_cmd(checkpoint: &Path, input: &Path, out: &Path, log: &mut RunLog) -> CliResult<()> {
    if !checkpoint.is_file() {
        return Err(CliError::Usage(format!("checkpoint {} does not exist", checkpoint.display())));
    }
    log.input(checkpoint)?;
    let bytes = fs::read(checkpoint).map_err(|e| Error::from(e).context(format!("reading {}", checkpoint.display())))?;
    let (model, _) = decode_checkpoint(&bytes).map_err(|e| e.context(format!("checkpoint {}", checkpoint.display())))?;
    let rows = if input.extension().is_some_and(|e| e == "json") {
        let (m, data) = load_examples(input, log)?;
        m.samples
            .iter()
            .zip(&data)
            .map(|(rec, ex)| {
                let p = predict(&model, &ex.seq).map_err(|e| e.context(format!("sample {}", rec.index)))?;
                Ok(PredictionRow { file: rec.file.clone(), predicted: p.class, probs: p.probs, truth: Some(rec.class) })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        log.input(input)?;
        let bytes = fs::read(input).map_err(|e| Error::from(e).context(format!("reading {}", input.display())))?;
        let seq = decode_rfdm(&bytes)?;
        let p = predict(&model, &seq)?;
        vec![PredictionRow { file: input.display().to_string(), predicted: p.class, probs: p.probs, truth: None }]
    };
    let path = out.join("predictions.json");
    write_json(&path, &rows)?;
    log.output(&path)?;
    let correct = rows.iter().filter(|r| r.truth == Some(r.predicted)).count();
    for r in &rows {
        println!("{} {}", r.file, r.predicted);
    }
    if rows.iter().any(|r| r.truth.is_some()) {
        println!("{correct}/{} correct", rows.len());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotFormat {
    Csv,
    Pgm,
}

/// Accepts either a full evaluation report or a bare `{"counts": [[..]]}` matrix.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConfusionInput {
    Report(Box<EvalReport>),
    Bare { counts: Vec<Vec<u64>> },
}

pub fn plot_cmd(input: &Path, out: &Path, format: PlotFormat, frame: usize, log: &mut RunLog) -> CliResult<()> {
    log.input(input)?;
    let bytes = fs::read(input).map_err(|e| Error::from(e).context(format!("reading {}", input.display())))?;
    let rendered = if input.extension().is_some_and(|e| e == "json") {
        if format == PlotFormat::Pgm {
            return Err(CliError::Usage("confusion matrices can only be exported as csv".into()));
        }
        let counts = match serde_json::from_slice::<ConfusionInput>(&bytes)
            .map_err(|e| Error::Format(format!("{}: not a confusion matrix or report: {e}", input.display())))?
        {
            ConfusionInput::Report(r) => r.confusion.rows(),
            ConfusionInput::Bare { counts } => counts,
        };
        if counts.len() != NUM_CLASSES {
            return Err(Error::Format(format!("confusion matrix has {} rows, expected {NUM_CLASSES}", counts.len())).into());
        }
        confusion_csv(&class_names(), &counts)?.into_bytes()
    } else {
        let seq = decode_rfdm(&bytes).map_err(|e| e.context(input.display().to_string()))?;
        match format {
            PlotFormat::Csv => frame_csv(&seq, frame)?.into_bytes(),
            PlotFormat::Pgm => frame_pgm(&seq, frame)?,
        }
    };
    write_file(out, &rendered)?;
    log.output(out)?;
    Ok(())
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::from(e).context(format!("hashing {}", path.display())))?;
        Ok(Self { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
    }
}
