use serde::{Deserialize, Serialize};

use super::bytes::{checked_product, Reader};
use crate::error::{Error, Result};
use crate::model::{CnnTcnConfig, Model, ModelKind};
use crate::nn::{AdamHyper, AdamState, Layer};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RFNN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Upper bound on any single architecture size read from a checkpoint.
const MAX_DIM: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// JSON header of a checkpoint: enough to rebuild the model skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptor {
    pub kind: ModelKind,
    pub config: CnnTcnConfig,
    pub init_seed: u64,
    pub tensors: Vec<TensorEntry>,
}

pub fn descriptor(model: &Model) -> Descriptor {
    Descriptor {
        kind: model.kind(),
        config: model.config().clone(),
        init_seed: model.seed(),
        tensors: model
            .named_state()
            .into_iter()
            .map(|(name, t)| TensorEntry {
                name,
                shape: t.shape().to_vec(),
            })
            .collect(),
    }
}

pub fn encode_checkpoint(model: &Model, adam: Option<&AdamState>) -> Result<Vec<u8>> {
    let desc = serde_json::to_vec(&descriptor(model))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(&desc);
    for (_, t) in model.named_state() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    match adam {
        None => out.push(0),
        Some(st) => {
            let sizes: Vec<usize> = model.clone().params_mut().iter().map(|t| t.len()).collect();
            let have: Vec<usize> = st.m.iter().map(Vec::len).collect();
            if sizes != have || st.v.iter().map(Vec::len).ne(sizes.iter().copied()) {
                return Err(Error::Shape {
                    op: "checkpoint optimizer state",
                    expected: sizes,
                    got: have,
                });
            }
            out.push(1);
            out.extend_from_slice(&st.step.to_le_bytes());
            let h = st.hyper;
            for v in [h.lr, h.beta1, h.beta2, h.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for buf in st.m.iter().chain(&st.v) {
                for v in buf {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

fn check_bounds(cfg: &CnnTcnConfig) -> Result<()> {
    let (kh, kw) = cfg.conv_kernel;
    let dims = [cfg.frames, cfg.height, cfg.width, kh, kw, cfg.tcn_kernel, cfg.tcn_width.unwrap_or(1)];
    let lists = [&cfg.conv_widths, &cfg.dilations, &cfg.head_hidden];
    let too_big = dims.iter().chain(lists.iter().flat_map(|l| l.iter())).any(|&d| d > MAX_DIM)
        || lists.iter().any(|l| l.len() > 16)
        || cfg.pooled_blocks > 16;
    if too_big {
        return Err(Error::Format("checkpoint: architecture sizes exceed decoder limits".into()));
    }
    Ok(())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Model, Option<AdamState>)> {
    let mut r = Reader::new(bytes, "RFNN checkpoint");
    r.magic(CHECKPOINT_MAGIC)?;
    r.version(CHECKPOINT_VERSION)?;
    let len = r.u32()? as usize;
    let desc: Descriptor = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::Format(format!("RFNN checkpoint: bad descriptor: {e}")))?;
    check_bounds(&desc.config)?;
    desc.config
        .validate()
        .map_err(|e| Error::Format(format!("RFNN checkpoint: {e}")))?;
    let total = desc
        .config
        .state_len(desc.kind)
        .ok_or_else(|| Error::Format("RFNN checkpoint: architecture size overflows".into()))?;
    if total.saturating_mul(8) > r.remaining() {
        return Err(Error::Format(format!(
            "RFNN checkpoint: architecture needs {total} values, only {} bytes remain",
            r.remaining()
        )));
    }
    let mut model = Model::new(desc.kind, desc.config.clone(), desc.init_seed)?;
    let expected = descriptor(&model).tensors;
    if expected != desc.tensors {
        return Err(Error::Format(
            "RFNN checkpoint: tensor list does not match the declared architecture".into(),
        ));
    }
    for t in model.state_mut() {
        let n = checked_product(t.shape(), "RFNN checkpoint")?;
        let values = r.f64s(n)?;
        t.data_mut().copy_from_slice(&values);
    }
    let adam = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let hyper = AdamHyper {
                lr: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                eps: r.f64()?,
            };
            let sizes: Vec<usize> = model.params_mut().iter().map(|t| t.len()).collect();
            let mut st = AdamState::new(hyper, &[]);
            st.step = step;
            for &n in &sizes {
                st.m.push(r.f64s(n)?);
            }
            for &n in &sizes {
                st.v.push(r.f64s(n)?);
            }
            Some(st)
        }
        flag => return Err(Error::Format(format!("RFNN checkpoint: bad optimizer flag {flag}"))),
    };
    r.finish()?;
    Ok((model, adam))
}
