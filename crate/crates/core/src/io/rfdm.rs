use super::bytes::{checked_product, put_u32, Reader};
use crate::dsp::{RfdmAxes, RfdmSequence, ScaleMode};
use crate::error::{Error, Result};

pub const RFDM_MAGIC: &[u8; 4] = b"RFDM";
pub const RFDM_VERSION: u32 = 1;

/// Serialises the map values as f32; axis calibration is not stored.
pub fn encode_rfdm(seq: &RfdmSequence) -> Result<Vec<u8>> {
    seq.validate()?;
    let mut out = Vec::with_capacity(25 + seq.data.len() * 4);
    out.extend_from_slice(RFDM_MAGIC);
    out.extend_from_slice(&RFDM_VERSION.to_le_bytes());
    for d in seq.shape() {
        put_u32(&mut out, d)?;
    }
    out.push(seq.scale_mode.code());
    for &v in &seq.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_rfdm(bytes: &[u8]) -> Result<RfdmSequence> {
    let mut r = Reader::new(bytes, "RFDM file");
    r.magic(RFDM_MAGIC)?;
    r.version(RFDM_VERSION)?;
    let shape = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
    let code = r.u8()?;
    let scale_mode = ScaleMode::from_code(code)
        .ok_or_else(|| Error::Format(format!("RFDM file: unknown scale mode {code}")))?;
    let n = checked_product(&shape, "RFDM file")?;
    let values = r.f32s(n)?;
    r.finish()?;
    let data: Vec<f64> = values.into_iter().map(f64::from).collect();
    let seq = RfdmSequence {
        n_frames: shape[0],
        n_range: shape[1],
        n_doppler: shape[2],
        scale_max: data.iter().copied().fold(0.0, f64::max),
        data,
        scale_mode,
        axes: RfdmAxes::default(),
    };
    seq.validate().map_err(|e| Error::Format(format!("RFDM file: {e}")))?;
    Ok(seq)
}

/// Rounds every value through f32, matching what a write/read cycle yields.
pub fn quantize(seq: &RfdmSequence) -> RfdmSequence {
    let mut out = seq.clone();
    out.data.iter_mut().for_each(|v| *v = f64::from(*v as f32));
    out
}
