//! Evaluation protocols: user leave-one-out, location and environment
//! holdout, and a stratified random split, with confusion-matrix reporting.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{preprocess, DspConfig, ScaleMode};
use crate::error::{Error, Result};
use crate::gesture::{
    dataset_plan, render_sample, DatasetSpec, Environment, GestureClass, SampleMeta, ScenePlacement, UserProfile,
    NUM_CLASSES,
};
use crate::io::SampleRecord;
use crate::model::{predict_batch, train, CnnTcnConfig, Example, ModelKind, TrainConfig, TrainSplit};
use crate::radar::RadarConfig;
use crate::seed;

/// Fraction of each fold's training pool held out for checkpoint selection.
pub const VAL_FRACTION: f64 = 0.15;
/// Fraction of the data tested by the random protocol.
pub const RANDOM_TEST_FRACTION: f64 = 0.2;
/// The position the location-holdout protocol trains on.
pub const TRAIN_LOCATION: (f64, f64) = (0.75, 0.0);
/// The environment the environment-holdout protocol trains on.
pub const TRAIN_ENVIRONMENT: Environment = Environment::Classroom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    LoocvUser,
    LocationHoldout,
    EnvironmentHoldout,
    Random,
}

impl SplitKind {
    pub const ALL: [SplitKind; 4] = [
        SplitKind::LoocvUser,
        SplitKind::LocationHoldout,
        SplitKind::EnvironmentHoldout,
        SplitKind::Random,
    ];

    /// Short name used on the command line.
    pub fn flag(self) -> &'static str {
        match self {
            SplitKind::LoocvUser => "loocv",
            SplitKind::LocationHoldout => "location",
            SplitKind::EnvironmentHoldout => "environment",
            SplitKind::Random => "random",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loocv" | "loocv_user" => Ok(SplitKind::LoocvUser),
            "location" | "location_holdout" => Ok(SplitKind::LocationHoldout),
            "environment" | "environment_holdout" => Ok(SplitKind::EnvironmentHoldout),
            "random" => Ok(SplitKind::Random),
            other => Err(Error::Config(format!(
                "unknown protocol {other:?} (expected loocv, location, environment or random)"
            ))),
        }
    }
}

/// The provenance a split needs from each sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleTags {
    pub class: GestureClass,
    pub user_id: Option<usize>,
    pub location: Option<(f64, f64)>,
    pub environment: Option<Environment>,
}

impl From<&SampleMeta> for SampleTags {
    fn from(m: &SampleMeta) -> Self {
        Self {
            class: m.class,
            user_id: Some(m.user_id),
            location: Some(m.placement.location_key()),
            environment: Some(m.placement.environment),
        }
    }
}

impl From<&SampleRecord> for SampleTags {
    fn from(r: &SampleRecord) -> Self {
        Self {
            class: r.class,
            user_id: r.user_id,
            location: r.location.map(|l| (l.range_m, l.azimuth_deg)),
            environment: r.environment,
        }
    }
}

/// One fold. Samples in none of `train`, `val` and `test` are listed in
/// `excluded`: holdout protocols test one group per fold and leave the other
/// held-out groups unused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub id: String,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub excluded: Vec<usize>,
}

impl SplitPlan {
    /// Checks that the four index sets partition `0..n` and that train and
    /// test are non-empty.
    pub fn check(&self, n: usize) -> Result<()> {
        let mut owner = vec![None; n];
        for (name, set) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
            ("excluded", &self.excluded),
        ] {
            for &i in set {
                let slot = owner.get_mut(i).ok_or(Error::Index { index: i, len: n })?;
                if let Some(prev) = slot.replace(name) {
                    return Err(Error::Data(format!("fold {}: sample {i} is in both {prev} and {name}", self.id)));
                }
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::Data(format!("fold {}: sample {i} is not assigned", self.id)));
        }
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::Data(format!("fold {}: empty train or test set", self.id)));
        }
        Ok(())
    }

    pub fn train_split(&self) -> TrainSplit {
        TrainSplit { train: self.train.clone(), val: self.val.clone() }
    }
}

fn need<T>(value: Option<T>, index: usize, field: &str, kind: SplitKind) -> Result<T> {
    value.ok_or_else(|| Error::Manifest(format!("sample {index} has no {field}, which the {kind} protocol requires")))
}

fn same_location(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.0 - b.0).abs() <= 1e-9 && (a.1 - b.1).abs() <= 1e-9
}

/// Splits `pool` into (train, val) with `VAL_FRACTION` of each class in val,
/// keeping at least one sample of every present class in train.
fn carve_val(tags: &[SampleTags], pool: &[usize], seed: u64, fold: u64) -> (Vec<usize>, Vec<usize>) {
    take_fraction(tags, pool, VAL_FRACTION, seed, "val", fold)
}

/// Per class, moves `round(fraction * count)` shuffled indices of `pool` to
/// the second list (never all of them). Both lists come back sorted.
fn take_fraction(
    tags: &[SampleTags],
    pool: &[usize],
    fraction: f64,
    seed: u64,
    label: &str,
    fold: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::rng(seed, label, fold);
    let (mut keep, mut take) = (Vec::new(), Vec::new());
    for class in GestureClass::ALL {
        let mut members: Vec<usize> = pool.iter().copied().filter(|&i| tags[i].class == class).collect();
        members.shuffle(&mut rng);
        let k = ((members.len() as f64 * fraction).round() as usize).min(members.len().saturating_sub(1));
        take.extend_from_slice(&members[..k]);
        keep.extend_from_slice(&members[k..]);
    }
    keep.sort_unstable();
    take.sort_unstable();
    (keep, take)
}

fn fold(
    kind: SplitKind,
    id: String,
    tags: &[SampleTags],
    pool: Vec<usize>,
    test: Vec<usize>,
    seed: u64,
    index: u64,
) -> SplitPlan {
    let mut used = vec![false; tags.len()];
    for &i in pool.iter().chain(&test) {
        used[i] = true;
    }
    let excluded = (0..tags.len()).filter(|&i| !used[i]).collect();
    let (train, val) = carve_val(tags, &pool, seed, index);
    SplitPlan { kind, id, train, val, test, excluded }
}

/// Builds the folds of `kind` over `tags`. Each fold is checked before it is
/// returned; `seed` only affects which samples go to validation (and to test
/// for the random protocol).
pub fn make_splits(tags: &[SampleTags], kind: SplitKind, seed: u64) -> Result<Vec<SplitPlan>> {
    if tags.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let all: Vec<usize> = (0..tags.len()).collect();
    let plans = match kind {
        SplitKind::LoocvUser => {
            let mut users = BTreeMap::new();
            for (i, t) in tags.iter().enumerate() {
                users.entry(need(t.user_id, i, "user_id", kind)?).or_insert_with(Vec::new).push(i);
            }
            if users.len() < 2 {
                return Err(Error::Data(format!("leave-one-user-out needs >= 2 users, found {}", users.len())));
            }
            users
                .into_iter()
                .enumerate()
                .map(|(k, (user, test))| {
                    let pool = all.iter().copied().filter(|&i| tags[i].user_id != Some(user)).collect();
                    fold(kind, format!("user-{user}"), tags, pool, test, seed, k as u64)
                })
                .collect::<Vec<_>>()
        }
        SplitKind::LocationHoldout => {
            let mut groups: Vec<((f64, f64), Vec<usize>)> = Vec::new();
            for (i, t) in tags.iter().enumerate() {
                let loc = need(t.location, i, "location", kind)?;
                match groups.iter_mut().find(|(l, _)| same_location(*l, loc)) {
                    Some((_, members)) => members.push(i),
                    None => groups.push((loc, vec![i])),
                }
            }
            groups.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
            let pos = groups
                .iter()
                .position(|(l, _)| same_location(*l, TRAIN_LOCATION))
                .ok_or_else(|| {
                    Error::Data(format!(
                        "location holdout needs samples at {} m, {} deg",
                        TRAIN_LOCATION.0, TRAIN_LOCATION.1
                    ))
                })?;
            let pool = groups.remove(pos).1;
            if groups.is_empty() {
                return Err(Error::Data("location holdout needs a second location to test".into()));
            }
            groups
                .into_iter()
                .enumerate()
                .map(|(k, ((r, az), test))| {
                    fold(kind, format!("location-{r}m-{az}deg"), tags, pool.clone(), test, seed, k as u64)
                })
                .collect()
        }
        SplitKind::EnvironmentHoldout => {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, t) in tags.iter().enumerate() {
                let env = need(t.environment, i, "environment", kind)?;
                let rank = Environment::ALL.iter().position(|&e| e == env).unwrap_or(usize::MAX);
                groups.entry(rank).or_default().push(i);
            }
            let train_rank = Environment::ALL.iter().position(|&e| e == TRAIN_ENVIRONMENT).unwrap_or(0);
            let pool = groups.remove(&train_rank).ok_or_else(|| {
                Error::Data(format!("environment holdout needs {} samples to train on", TRAIN_ENVIRONMENT.name()))
            })?;
            if groups.is_empty() {
                return Err(Error::Data("environment holdout needs a second environment to test".into()));
            }
            groups
                .into_iter()
                .enumerate()
                .map(|(k, (rank, test))| {
                    let name = Environment::ALL[rank].name();
                    fold(kind, format!("env-{name}"), tags, pool.clone(), test, seed, k as u64)
                })
                .collect()
        }
        SplitKind::Random => {
            let (pool, test) = take_fraction(tags, &all, RANDOM_TEST_FRACTION, seed, "test", 0);
            vec![fold(kind, "random".into(), tags, pool, test, seed, 0)]
        }
    };
    for p in &plans {
        p.check(tags.len())?;
    }
    Ok(plans)
}

/// Train/validation split over the whole dataset, for training without a test set.
pub fn validation_split(tags: &[SampleTags], seed: u64) -> TrainSplit {
    let all: Vec<usize> = (0..tags.len()).collect();
    let (train, val) = carve_val(tags, &all, seed, 0);
    TrainSplit { train, val }
}

/// Convenience wrapper taking manifest rows.
pub fn make_splits_for_records(records: &[SampleRecord], kind: SplitKind, seed: u64) -> Result<Vec<SplitPlan>> {
    let tags: Vec<SampleTags> = records.iter().map(SampleTags::from).collect();
    make_splits(&tags, kind, seed)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: GestureClass, predicted: GestureClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (c, x) in row.iter_mut().zip(o) {
                *c += x;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// Recall per class; `None` for classes with no test samples.
    pub fn recall(&self) -> [Option<f64>; NUM_CLASSES] {
        std::array::from_fn(|i| {
            let row: u64 = self.counts[i].iter().sum();
            (row > 0).then(|| self.counts[i][i] as f64 / row as f64)
        })
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.iter().map(|r| r.to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub id: String,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub train_seed: u64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: SplitKind,
    pub model: ModelKind,
    pub folds: Vec<FoldReport>,
    /// Unweighted mean of the fold accuracies.
    pub mean_accuracy: f64,
    /// Sum of the fold confusion matrices.
    pub confusion: ConfusionMatrix,
    /// SHA-256 of the model and training configuration.
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

/// Hash identifying a (model, training) configuration.
pub fn config_hash(kind: ModelKind, model: &CnnTcnConfig, train: &TrainConfig) -> Result<String> {
    let json = serde_json::to_string(&(kind, model, train))?;
    Ok(seed::sha256_hex(json.as_bytes()))
}

/// Trains one model per plan from a fresh initialisation and scores its test
/// set. Fold `k` trains with seed `derive(train.seed, "fold", k)`.
pub fn run_protocol(
    data: &[Example],
    plans: &[SplitPlan],
    kind: ModelKind,
    model: &CnnTcnConfig,
    train_cfg: &TrainConfig,
) -> Result<EvalReport> {
    let protocol = plans.first().ok_or_else(|| Error::Data("no folds to run".into()))?.kind;
    for p in plans {
        if p.kind != protocol {
            return Err(Error::Data(format!("fold {} is {} but the run is {protocol}", p.id, p.kind)));
        }
        p.check(data.len())?;
    }
    let folds = plans
        .par_iter()
        .enumerate()
        .map(|(k, plan)| {
            let tc = TrainConfig { seed: seed::derive(train_cfg.seed, "fold", k as u64), ..train_cfg.clone() };
            let run = || -> Result<FoldReport> {
                let outcome = train(kind, model, data, &plan.train_split(), &tc)?;
                let preds = predict_batch(&outcome.model, data, &plan.test)?;
                let mut confusion = ConfusionMatrix::default();
                for (p, &i) in preds.iter().zip(&plan.test) {
                    confusion.add(data[i].label, p.class);
                }
                Ok(FoldReport {
                    id: plan.id.clone(),
                    accuracy: confusion.accuracy(),
                    confusion,
                    train_seed: tc.seed,
                    best_epoch: outcome.best_epoch,
                })
            };
            run().map_err(|e| e.context(format!("fold {}", plan.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = ConfusionMatrix::default();
    for f in &folds {
        confusion.merge(&f.confusion);
    }
    Ok(EvalReport {
        protocol,
        model: kind,
        mean_accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / folds.len() as f64,
        seeds: folds.iter().map(|f| f.train_seed).collect(),
        folds,
        confusion,
        config_hash: config_hash(kind, model, train_cfg)?,
    })
}

/// Everything needed to regenerate and evaluate the standard synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub master_seed: u64,
    pub radar: RadarConfig,
    pub dataset: DatasetSpec,
    pub dsp: DspConfig,
    pub model: CnnTcnConfig,
    pub train: TrainConfig,
}

impl BenchmarkSpec {
    /// 7 classes x 30 instances x 3 users x 3 placements with moderate noise,
    /// conditioned to a 4 x 16 crop around the hand.
    pub fn standard() -> Self {
        let master_seed = 7;
        let dataset = DatasetSpec {
            instances_per_class: 30,
            users: UserProfile::draw(3, 0.1, master_seed),
            placements: vec![
                ScenePlacement { base_range: 0.75, azimuth_deg: 0.0, environment: Environment::Classroom },
                ScenePlacement { base_range: 1.0, azimuth_deg: 30.0, environment: Environment::Office },
                ScenePlacement { base_range: 1.25, azimuth_deg: -30.0, environment: Environment::ConferenceHall },
            ],
            n_frames: 16,
            noise_sigma: 1e-5,
        };
        Self {
            master_seed,
            radar: RadarConfig::default(),
            dataset,
            dsp: DspConfig { crop_range: 4, crop_doppler: 16, scale_mode: ScaleMode::LogDb, ..Default::default() },
            model: CnnTcnConfig { frames: 16, height: 4, width: 16, ..Default::default() },
            // At 30 epochs the default rate is still improving at the last epoch.
            train: TrainConfig { lr: 1e-3, epochs: 30, ..Default::default() },
        }
    }

    /// Renders and conditions every sample, returning examples with their provenance.
    pub fn build(&self) -> Result<(Vec<Example>, Vec<SampleMeta>)> {
        let plan = dataset_plan(&self.dataset, self.master_seed)?;
        let examples = plan
            .par_iter()
            .map(|m| {
                let cube = render_sample(m, &self.dataset, &self.radar)?;
                Ok(Example { seq: preprocess(&cube, &self.dsp)?, label: m.class })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((examples, plan))
    }
}
