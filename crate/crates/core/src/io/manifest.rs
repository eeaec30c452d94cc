use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::DspConfig;
use crate::error::{Error, Result};
use crate::gesture::{DatasetSpec, Environment, GestureClass, SampleMeta};
use crate::radar::RadarConfig;
use crate::seed::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    /// Raw data cubes.
    Rfdc,
    /// Conditioned range-Doppler map sequences.
    Rfdm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub range_m: f64,
    pub azimuth_deg: f64,
}

/// One sample file plus its provenance. Provenance fields are optional so a
/// hand-edited manifest can omit them; protocols that need one reject it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub index: usize,
    /// Path relative to the manifest's directory.
    pub file: String,
    pub class: GestureClass,
    #[serde(default)]
    pub user_id: Option<usize>,
    #[serde(default)]
    pub location_id: Option<usize>,
    #[serde(default)]
    pub location: Option<Location>,
    #[serde(default)]
    pub environment: Option<Environment>,
    pub seed: u64,
    pub sha256: String,
}

impl SampleRecord {
    pub fn from_meta(meta: &SampleMeta, file: String, sha256: String) -> Self {
        Self {
            index: meta.index,
            file,
            class: meta.class,
            user_id: Some(meta.user_id),
            location_id: Some(meta.location_id),
            location: Some(Location {
                range_m: meta.placement.base_range,
                azimuth_deg: meta.placement.azimuth_deg,
            }),
            environment: Some(meta.placement.environment),
            seed: meta.seed,
            sha256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub payload: PayloadKind,
    pub master_seed: u64,
    pub radar: RadarConfig,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub dsp: Option<DspConfig>,
    pub samples: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| {
            Error::Manifest(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(format!("manifest {}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        for (pos, s) in self.samples.iter().enumerate() {
            if s.index != pos {
                return Err(Error::Manifest(format!("sample at position {pos} has index {}", s.index)));
            }
            if s.file.is_empty() || Path::new(&s.file).is_absolute() {
                return Err(Error::Manifest(format!(
                    "sample {pos}: file path {:?} must be relative and non-empty",
                    s.file
                )));
            }
            if s.sha256.len() != 64 || !s.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(Error::Manifest(format!("sample {pos}: malformed sha256 {:?}", s.sha256)));
            }
        }
        Ok(())
    }

    /// Per-class sample counts in class order.
    pub fn class_counts(&self) -> [usize; crate::gesture::NUM_CLASSES] {
        let mut out = [0; crate::gesture::NUM_CLASSES];
        for s in &self.samples {
            out[s.class.index()] += 1;
        }
        out
    }
}

/// Reads `record`'s file under `dir`, failing with an integrity error if its
/// hash does not match the manifest.
pub fn read_verified(dir: &Path, record: &SampleRecord) -> Result<Vec<u8>> {
    let path: PathBuf = dir.join(&record.file);
    let bytes = fs::read(&path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    let got = sha256_hex(&bytes);
    if !got.eq_ignore_ascii_case(&record.sha256) {
        return Err(Error::Integrity {
            path,
            reason: format!("sha256 {got} does not match manifest {}", record.sha256),
        });
    }
    Ok(bytes)
}

/// Writes `bytes`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::from(e).context(format!("creating {}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
}
