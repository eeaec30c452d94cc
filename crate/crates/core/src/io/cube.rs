use num_complex::Complex64;

use super::bytes::{checked_product, put_u32, Reader};
use crate::error::{Error, Result};
use crate::radar::{DataCube, RadarConfig};

pub const CUBE_MAGIC: &[u8; 4] = b"RFDC";
pub const CUBE_VERSION: u32 = 1;

/// A decoded cube before it is matched against a radar configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCube {
    /// `[frames, chirps, samples, rx]`.
    pub dims: [usize; 4],
    pub samples: Vec<Complex64>,
}

impl RawCube {
    /// Attaches `config`, checking that chirp, sample and receiver counts agree.
    pub fn into_cube(self, config: RadarConfig) -> Result<DataCube> {
        let [frames, chirps, samples, rx] = self.dims;
        if (chirps, samples, rx) != (config.n_chirps, config.n_samples, config.n_rx) {
            return Err(Error::Format(format!(
                "cube has {chirps} chirps x {samples} samples x {rx} rx, configuration expects {} x {} x {}",
                config.n_chirps, config.n_samples, config.n_rx
            )));
        }
        let cube = DataCube {
            config,
            n_frames: frames,
            samples: self.samples,
        };
        cube.validate()?;
        Ok(cube)
    }
}

pub fn encode_cube(cube: &DataCube) -> Result<Vec<u8>> {
    cube.validate()?;
    let mut out = Vec::with_capacity(28 + cube.samples.len() * 16);
    out.extend_from_slice(CUBE_MAGIC);
    out.extend_from_slice(&CUBE_VERSION.to_le_bytes());
    for d in cube.dims() {
        put_u32(&mut out, d)?;
    }
    for z in &cube.samples {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out.extend_from_slice(&(cube.samples.len() as u64).to_le_bytes());
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<RawCube> {
    let mut r = Reader::new(bytes, "RFDC cube");
    r.magic(CUBE_MAGIC)?;
    r.version(CUBE_VERSION)?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let count = checked_product(&dims, "RFDC cube")?;
    let values = count
        .checked_mul(2)
        .ok_or_else(|| Error::Format("RFDC cube: sample count overflows".into()))?;
    let flat = r.f64s(values)?;
    let trailer = r.u64()?;
    if trailer != count as u64 {
        return Err(Error::Format(format!(
            "RFDC cube: trailer records {trailer} samples, header implies {count}"
        )));
    }
    r.finish()?;
    let samples = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok(RawCube { dims, samples })
}
