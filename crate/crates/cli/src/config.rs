use std::fs;
use std::path::Path;

use rfdm_core::dsp::DspConfig;
use rfdm_core::eval::{BenchmarkSpec, SplitKind};
use rfdm_core::gesture::DatasetSpec;
use rfdm_core::model::{CnnTcnConfig, ModelKind, TrainConfig};
use rfdm_core::radar::RadarConfig;
use rfdm_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a pipeline run reads from its JSON config file. Omitted fields
/// take the standard benchmark values. `train.seed` is always replaced by a
/// value derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub radar: RadarConfig,
    pub dataset: DatasetSpec,
    pub dsp: DspConfig,
    pub model_kind: ModelKind,
    pub model: CnnTcnConfig,
    pub train: TrainConfig,
    pub protocol: SplitKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let b = BenchmarkSpec::standard();
        Self {
            seed: b.master_seed,
            radar: b.radar,
            dataset: b.dataset,
            dsp: b.dsp,
            model_kind: ModelKind::CnnTcn,
            model: b.model,
            train: b.train,
            protocol: SplitKind::LoocvUser,
        }
    }
}

/// Overrides given on the command line; `None` leaves the file or default value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub no_mti: bool,
    pub model_kind: Option<ModelKind>,
    pub protocol: Option<SplitKind>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    /// Defaults, then the file (if any), then the flags.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::from(e).context(format!("reading {}", p.display())))?;
                Self::parse(&text).map_err(|e| e.context(format!("config {}", p.display())))?
            }
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if overrides.no_mti {
            cfg.dsp.mti = false;
        }
        if let Some(k) = overrides.model_kind {
            cfg.model_kind = k;
        }
        if let Some(p) = overrides.protocol {
            cfg.protocol = p;
        }
        cfg.train.seed = rfdm_core::seed::derive(cfg.seed, "train", 0);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let want = (self.dataset.n_frames, self.dsp.crop_range, self.dsp.crop_doppler);
        let got = (self.model.frames, self.model.height, self.model.width);
        if want != got {
            return Err(Error::Config(format!(
                "model input (frames, height, width) = {got:?} does not match the conditioned maps {want:?}"
            )));
        }
        Ok(())
    }
}
