//! Range compression, fourth-order MTI, Doppler processing and RFDM assembly.
//!
//! The chain for one cube is
//!
//! ```text
//! cube[frame][chirp][sample][rx]
//!   -> range FFT over samples (zero-padded to a power of two)
//!   -> MTI along the chirp axis (optional, drops 4 chirps)
//!   -> Doppler FFT over chirps (zero-padded, fftshifted), magnitude, rx average
//!   -> crop + normalise
//! ```

mod fft;

pub use fft::{dft_oracle, fft, fftshift, hann, ifft};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{DataCube, RadarConfig};

/// Binomial taps of the fourth-order canceller, newest sample first.
pub const MTI_TAPS: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    None,
    #[default]
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Option<Vec<f64>> {
        match self {
            Window::None => None,
            Window::Hann => Some(hann(n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Raw magnitudes straight out of the Doppler FFT.
    Raw,
    /// Divide by the per-sequence maximum.
    #[default]
    LinearMaxnorm,
    /// `20*log10(x + 1e-12)`, then min-max to `[0, 1]` per sequence.
    LogDb,
}

impl ScaleMode {
    pub fn code(self) -> u8 {
        match self {
            ScaleMode::Raw => 0,
            ScaleMode::LinearMaxnorm => 1,
            ScaleMode::LogDb => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ScaleMode::Raw),
            1 => Some(ScaleMode::LinearMaxnorm),
            2 => Some(ScaleMode::LogDb),
            _ => None,
        }
    }
}

/// Complex tensor indexed `[frame][slow][bin][rx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCube {
    pub n_frames: usize,
    pub n_slow: usize,
    pub n_bins: usize,
    pub n_rx: usize,
    pub data: Vec<Complex64>,
}

impl ComplexCube {
    #[inline]
    pub fn index(&self, frame: usize, slow: usize, bin: usize, rx: usize) -> usize {
        ((frame * self.n_slow + slow) * self.n_bins + bin) * self.n_rx + rx
    }

    pub fn get(&self, frame: usize, slow: usize, bin: usize, rx: usize) -> Complex64 {
        self.data[self.index(frame, slow, bin, rx)]
    }

    fn frame_len(&self) -> usize {
        self.n_slow * self.n_bins * self.n_rx
    }
}

/// Axis calibration carried alongside a map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RfdmAxes {
    /// Metres per range bin.
    pub range_bin_m: f64,
    /// m/s per Doppler bin.
    pub velocity_bin_mps: f64,
    /// Range bin of row 0 in the uncropped map.
    pub range_offset: usize,
    /// Row-relative index of the zero-velocity Doppler column.
    pub zero_doppler: usize,
}

impl RfdmAxes {
    pub fn range_of_bin(&self, bin: usize) -> f64 {
        (bin + self.range_offset) as f64 * self.range_bin_m
    }

    pub fn velocity_of_bin(&self, bin: usize) -> f64 {
        (bin as f64 - self.zero_doppler as f64) * self.velocity_bin_mps
    }
}

/// Per-frame range x Doppler magnitude maps, `[frame][range][doppler]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfdmSequence {
    pub n_frames: usize,
    pub n_range: usize,
    pub n_doppler: usize,
    pub data: Vec<f64>,
    pub scale_mode: ScaleMode,
    /// Per-sequence maximum before normalisation (for `Raw`, the current max).
    pub scale_max: f64,
    pub axes: RfdmAxes,
}

impl RfdmSequence {
    /// Wraps raw `[frame][range][doppler]` values with uncalibrated axes.
    pub fn from_data(shape: [usize; 3], data: Vec<f64>, scale_mode: ScaleMode) -> Result<Self> {
        let seq = Self {
            n_frames: shape[0],
            n_range: shape[1],
            n_doppler: shape[2],
            scale_max: data.iter().copied().fold(0.0, f64::max),
            data,
            scale_mode,
            axes: RfdmAxes::default(),
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.n_frames, self.n_range, self.n_doppler]
    }

    #[inline]
    pub fn get(&self, frame: usize, range: usize, doppler: usize) -> f64 {
        self.data[(frame * self.n_range + range) * self.n_doppler + doppler]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        let n = self.n_range * self.n_doppler;
        &self.data[frame * n..(frame + 1) * n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// `(range, doppler)` of the largest value in `frame`, first index on ties.
    pub fn argmax(&self, frame: usize) -> (usize, usize) {
        let map = self.frame(frame);
        let mut best = 0;
        for (i, &v) in map.iter().enumerate() {
            if v > map[best] {
                best = i;
            }
        }
        (best / self.n_doppler, best % self.n_doppler)
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.n_frames * self.n_range * self.n_doppler;
        if self.data.len() != want {
            return Err(Error::Size(format!(
                "RFDM holds {} values, shape {:?} requires {want}",
                self.data.len(),
                self.shape()
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite RFDM value at flat index {i}")));
        }
        if self.scale_mode != ScaleMode::LogDb && self.data.iter().any(|&v| v < 0.0) {
            return Err(Error::Data("negative magnitude in linear RFDM".into()));
        }
        Ok(())
    }
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Fast-time FFT per (frame, chirp, rx), zero-padded to the next power of two.
pub fn range_compress(cube: &DataCube, window: Window) -> Result<ComplexCube> {
    cube.validate()?;
    let cfg = &cube.config;
    let n_rx = cfg.n_rx;
    let n_fft = next_pow2(cfg.n_samples);
    let win = window.coefficients(cfg.n_samples);
    let mut out = ComplexCube {
        n_frames: cube.n_frames,
        n_slow: cfg.n_chirps,
        n_bins: n_fft,
        n_rx,
        data: vec![Complex64::new(0.0, 0.0); cube.n_frames * cfg.n_chirps * n_fft * n_rx],
    };
    let frame_len = out.frame_len();
    out.data
        .par_chunks_mut(frame_len)
        .enumerate()
        .for_each(|(frame, dst)| {
            let src = cube.frame(frame);
            let mut line = vec![Complex64::new(0.0, 0.0); n_fft];
            for chirp in 0..cfg.n_chirps {
                for rx in 0..n_rx {
                    line.fill(Complex64::new(0.0, 0.0));
                    for n in 0..cfg.n_samples {
                        let v = src[(chirp * cfg.n_samples + n) * n_rx + rx];
                        line[n] = match &win {
                            Some(w) => v * w[n],
                            None => v,
                        };
                    }
                    fft::fft_chunks_in_place(&mut line, n_fft);
                    for (bin, v) in line.iter().enumerate() {
                        dst[(chirp * n_fft + bin) * n_rx + rx] = *v;
                    }
                }
            }
        });
    Ok(out)
}

/// Fourth-order canceller along the slow-time axis:
/// `y[l] = x[l] - 4x[l-1] + 6x[l-2] - 4x[l-3] + x[l-4]` for `l = 4..n_slow`.
pub fn mti_filter(rc: &ComplexCube) -> Result<ComplexCube> {
    let order = MTI_TAPS.len() - 1;
    if rc.n_slow <= order {
        return Err(Error::Size(format!(
            "MTI needs at least {} slow-time samples, got {}",
            order + 1,
            rc.n_slow
        )));
    }
    let n_out = rc.n_slow - order;
    let stride = rc.n_bins * rc.n_rx;
    let mut out = ComplexCube {
        n_frames: rc.n_frames,
        n_slow: n_out,
        n_bins: rc.n_bins,
        n_rx: rc.n_rx,
        data: Vec::with_capacity(rc.n_frames * n_out * stride),
    };
    for frame in 0..rc.n_frames {
        let src = &rc.data[frame * rc.frame_len()..(frame + 1) * rc.frame_len()];
        for l in order..rc.n_slow {
            for j in 0..stride {
                let mut acc = Complex64::new(0.0, 0.0);
                for (lag, tap) in MTI_TAPS.iter().enumerate() {
                    acc += src[(l - lag) * stride + j] * *tap;
                }
                out.data.push(acc);
            }
        }
    }
    Ok(out)
}

/// Slow-time FFT per (frame, bin, rx), fftshift, magnitude, rx average.
///
/// The returned sequence is uncropped and in [`ScaleMode::Raw`]; its axes
/// are calibrated against `config`.
pub fn doppler_process(rc: &ComplexCube, window: Window, config: &RadarConfig) -> Result<RfdmSequence> {
    if rc.n_slow < 2 {
        return Err(Error::Size(format!(
            "Doppler processing needs at least 2 slow-time samples, got {}",
            rc.n_slow
        )));
    }
    let n_fft = next_pow2(rc.n_slow);
    let win = window.coefficients(rc.n_slow);
    let map_len = rc.n_bins * n_fft;
    let mut data = vec![0.0; rc.n_frames * map_len];
    let stride = rc.n_bins * rc.n_rx;
    data.par_chunks_mut(map_len).enumerate().for_each(|(frame, map)| {
        let src = &rc.data[frame * rc.frame_len()..(frame + 1) * rc.frame_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n_fft];
        let rx_scale = 1.0 / rc.n_rx as f64;
        for bin in 0..rc.n_bins {
            for rx in 0..rc.n_rx {
                line.fill(Complex64::new(0.0, 0.0));
                for l in 0..rc.n_slow {
                    let v = src[l * stride + bin * rc.n_rx + rx];
                    line[l] = match &win {
                        Some(w) => v * w[l],
                        None => v,
                    };
                }
                fft::fft_chunks_in_place(&mut line, n_fft);
                fftshift(&mut line);
                let row = &mut map[bin * n_fft..(bin + 1) * n_fft];
                for (cell, v) in row.iter_mut().zip(&line) {
                    *cell += v.norm() * rx_scale;
                }
            }
        }
    });
    let range_fft = rc.n_bins;
    let seq = RfdmSequence {
        n_frames: rc.n_frames,
        n_range: rc.n_bins,
        n_doppler: n_fft,
        scale_max: data.iter().copied().fold(0.0, f64::max),
        data,
        scale_mode: ScaleMode::Raw,
        axes: RfdmAxes {
            range_bin_m: config.derived()?.max_range / range_fft as f64,
            velocity_bin_mps: config.wavelength() / (2.0 * n_fft as f64 * config.pri_s),
            range_offset: 0,
            zero_doppler: n_fft / 2,
        },
    };
    Ok(seq)
}

/// Output window of [`condition_rfdm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    pub n_range: usize,
    pub n_doppler: usize,
    /// Centre of the gesture zone, metres.
    pub zone_center_m: f64,
}

/// Crops a raw sequence around the gesture zone and zero Doppler, then normalises.
///
/// The range window is centred on `zone_center_m` and clamped into the map;
/// the Doppler window is centred on the zero-velocity column.
pub fn condition_rfdm(seq: &RfdmSequence, crop: CropSpec, scale_mode: ScaleMode) -> Result<RfdmSequence> {
    seq.validate()?;
    if crop.n_range == 0 || crop.n_doppler == 0 {
        return Err(Error::Size("crop sizes must be >= 1".into()));
    }
    if crop.n_range > seq.n_range || crop.n_doppler > seq.n_doppler {
        return Err(Error::Size(format!(
            "crop {}x{} exceeds map {}x{}",
            crop.n_range, crop.n_doppler, seq.n_range, seq.n_doppler
        )));
    }
    if !crop.zone_center_m.is_finite() {
        return Err(Error::Param("zone_center_m must be finite".into()));
    }
    let centre_bin = (crop.zone_center_m / seq.axes.range_bin_m).round().max(0.0) as usize;
    let r0 = centre_bin
        .saturating_sub(crop.n_range / 2)
        .min(seq.n_range - crop.n_range);
    let d0 = (seq.axes.zero_doppler.saturating_sub(crop.n_doppler / 2)).min(seq.n_doppler - crop.n_doppler);

    let mut data = Vec::with_capacity(seq.n_frames * crop.n_range * crop.n_doppler);
    for f in 0..seq.n_frames {
        for r in r0..r0 + crop.n_range {
            let row = (f * seq.n_range + r) * seq.n_doppler;
            data.extend_from_slice(&seq.data[row + d0..row + d0 + crop.n_doppler]);
        }
    }
    let peak = data.iter().copied().fold(0.0, f64::max);
    match scale_mode {
        ScaleMode::Raw => {}
        ScaleMode::LinearMaxnorm => {
            if peak > 0.0 {
                data.iter_mut().for_each(|v| *v /= peak);
            }
        }
        ScaleMode::LogDb => {
            data.iter_mut().for_each(|v| *v = 20.0 * (*v + 1e-12).log10());
            let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            data.iter_mut()
                .for_each(|v| *v = if span > 0.0 { (*v - lo) / span } else { 0.0 });
        }
    }
    Ok(RfdmSequence {
        n_frames: seq.n_frames,
        n_range: crop.n_range,
        n_doppler: crop.n_doppler,
        data,
        scale_mode,
        scale_max: peak,
        axes: RfdmAxes {
            range_offset: seq.axes.range_offset + r0,
            zero_doppler: seq.axes.zero_doppler - d0,
            ..seq.axes
        },
    })
}

/// Full preprocessing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    pub range_window: Window,
    pub doppler_window: Window,
    pub mti: bool,
    pub crop_range: usize,
    pub crop_doppler: usize,
    pub zone_center_m: f64,
    pub scale_mode: ScaleMode,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            range_window: Window::Hann,
            doppler_window: Window::Hann,
            mti: true,
            crop_range: 32,
            crop_doppler: 32,
            zone_center_m: 1.0,
            scale_mode: ScaleMode::LinearMaxnorm,
        }
    }
}

impl DspConfig {
    pub fn crop(&self) -> CropSpec {
        CropSpec {
            n_range: self.crop_range,
            n_doppler: self.crop_doppler,
            zone_center_m: self.zone_center_m,
        }
    }
}

/// Uncropped raw range-Doppler maps for a cube.
pub fn range_doppler_maps(cube: &DataCube, cfg: &DspConfig) -> Result<RfdmSequence> {
    let rc = range_compress(cube, cfg.range_window)?;
    let rc = if cfg.mti { mti_filter(&rc)? } else { rc };
    doppler_process(&rc, cfg.doppler_window, &cube.config)
}

/// Cube to network-ready RFDM sequence.
pub fn preprocess(cube: &DataCube, cfg: &DspConfig) -> Result<RfdmSequence> {
    let raw = range_doppler_maps(cube, cfg)?;
    condition_rfdm(&raw, cfg.crop(), cfg.scale_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::{synthesize_cube, Scatterer};

    fn small_cfg() -> RadarConfig {
        RadarConfig {
            n_chirps: 32,
            ..Default::default()
        }
    }

    fn trace(values: impl Fn(usize) -> Complex64, n: usize) -> ComplexCube {
        ComplexCube {
            n_frames: 1,
            n_slow: n,
            n_bins: 1,
            n_rx: 1,
            data: (0..n).map(values).collect(),
        }
    }

    #[test]
    fn static_target_range_bin_with_padding() {
        let cfg = RadarConfig::default();
        let res = cfg.derived().unwrap().range_resolution;
        let cube = synthesize_cube(&cfg, &[Scatterer::fixed(5.0 * res, 1.0)], 1, 0.0, 0).unwrap();
        let rc = range_compress(&cube, Window::None).unwrap();
        assert_eq!(rc.n_bins, 128);
        let best = (0..rc.n_bins)
            .max_by(|&a, &b| rc.get(0, 0, a, 0).norm().total_cmp(&rc.get(0, 0, b, 0).norm()))
            .unwrap();
        assert_eq!(best, (5.0f64 * 128.0 / 112.0).round() as usize);
    }

    #[test]
    fn zero_cube_compresses_to_zero() {
        let cube = DataCube::zeros(small_cfg(), 2);
        let rc = range_compress(&cube, Window::Hann).unwrap();
        assert!(rc.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn two_targets_two_peaks() {
        let cfg = RadarConfig::default();
        let cube = synthesize_cube(
            &cfg,
            &[Scatterer::fixed(10.0, 1.0), Scatterer::fixed(40.0, 1.0)],
            1,
            0.0,
            0,
        )
        .unwrap();
        let rc = range_compress(&cube, Window::None).unwrap();
        let mag: Vec<f64> = (0..rc.n_bins).map(|b| rc.get(0, 0, b, 0).norm()).collect();
        let bin_of = |r: f64| (cfg.beat_frequency(r) / (cfg.sample_rate_hz / 128.0)).round() as usize;
        for b in [bin_of(10.0), bin_of(40.0)] {
            let near = (b - 1..=b + 1).map(|i| mag[i]).fold(0.0, f64::max);
            assert!(near > 0.5 * 112.0, "bin {b}: {near}");
            let peak = (b - 1..=b + 1).max_by(|&x, &y| mag[x].total_cmp(&mag[y])).unwrap();
            assert!(mag[peak] >= mag[peak - 1] && mag[peak] >= mag[peak + 1]);
        }
    }

    #[test]
    fn mti_impulse_response_is_binomial() {
        let rc = trace(|l| Complex64::new(if l == 4 { 1.0 } else { 0.0 }, 0.0), 12);
        let out = mti_filter(&rc).unwrap();
        assert_eq!(out.n_slow, 8);
        // Output index j corresponds to input l = j + 4.
        let got: Vec<f64> = out.data.iter().map(|z| z.re).collect();
        assert_eq!(&got[..5], &MTI_TAPS);
        assert!(got[5..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mti_cancels_constant() {
        let rc = trace(|_| Complex64::new(0.37, -1.25), 16);
        let out = mti_filter(&rc).unwrap();
        let scale = Complex64::new(0.37, -1.25).norm();
        assert!(out.data.iter().all(|z| z.norm() <= 1e-12 * scale));
    }

    #[test]
    fn mti_annihilates_cubics_and_maps_quartic_to_24() {
        for degree in 1..=3u32 {
            let rc = trace(|l| Complex64::new((l as f64).powi(degree as i32), 0.5 * l as f64), 20);
            let out = mti_filter(&rc).unwrap();
            let scale = 19f64.powi(degree as i32);
            for z in &out.data {
                assert!(z.norm() <= 1e-9 * scale, "degree {degree}: {z}");
            }
        }
        let rc = trace(|l| Complex64::new((l as f64).powi(4), 0.0), 20);
        for z in mti_filter(&rc).unwrap().data {
            assert!((z.re - 24.0).abs() < 1e-9 * 19f64.powi(4));
        }
    }

    #[test]
    fn mti_needs_five_samples() {
        let rc = trace(|_| Complex64::new(1.0, 0.0), 4);
        assert!(matches!(mti_filter(&rc), Err(Error::Size(_))));
        assert!(mti_filter(&trace(|_| Complex64::new(1.0, 0.0), 5)).is_ok());
    }

    #[test]
    fn static_target_without_mti_sits_at_zero_doppler() {
        let cfg = small_cfg();
        let cube = synthesize_cube(&cfg, &[Scatterer::fixed(3.0, 1.0)], 1, 0.0, 0).unwrap();
        let dsp = DspConfig {
            mti: false,
            ..Default::default()
        };
        let seq = range_doppler_maps(&cube, &dsp).unwrap();
        assert_eq!(seq.argmax(0).1, seq.axes.zero_doppler);
        assert_eq!(seq.axes.zero_doppler, 16);
    }

    #[test]
    fn velocity_three_cells_lands_three_bins_up() {
        let cfg = RadarConfig::default();
        let v = 3.0 * cfg.derived().unwrap().doppler_resolution;
        let cube = synthesize_cube(&cfg, &[Scatterer::moving(6.0, v, 1.0)], 1, 0.0, 0).unwrap();
        let dsp = DspConfig {
            mti: false,
            range_window: Window::None,
            doppler_window: Window::None,
            ..Default::default()
        };
        let seq = range_doppler_maps(&cube, &dsp).unwrap();
        assert_eq!(seq.argmax(0).1, seq.axes.zero_doppler + 3);
    }

    #[test]
    fn clutter_only_scene_vanishes_under_mti() {
        let cfg = RadarConfig::default();
        let scene = [
            Scatterer::fixed(1.3, 0.5),
            Scatterer::fixed(4.8, 0.8),
            Scatterer::fixed(9.1, 0.3),
        ];
        let cube = synthesize_cube(&cfg, &scene, 2, 0.0, 0).unwrap();
        let with = range_doppler_maps(&cube, &DspConfig::default()).unwrap();
        let without = range_doppler_maps(
            &cube,
            &DspConfig {
                mti: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(without.max() > 1.0);
        assert!(with.max() <= 1e-9 * without.max(), "{} vs {}", with.max(), without.max());
    }

    fn ramp_seq() -> RfdmSequence {
        let (f, r, d) = (2, 128, 128);
        RfdmSequence {
            n_frames: f,
            n_range: r,
            n_doppler: d,
            data: (0..f * r * d).map(|i| (i % 97) as f64 * 0.5).collect(),
            scale_mode: ScaleMode::Raw,
            scale_max: 48.0,
            axes: RfdmAxes {
                range_bin_m: 0.8,
                velocity_bin_mps: 0.46,
                range_offset: 0,
                zero_doppler: 64,
            },
        }
    }

    #[test]
    fn crop_shape_and_maxnorm() {
        let crop = CropSpec {
            n_range: 32,
            n_doppler: 32,
            zone_center_m: 1.0,
        };
        let out = condition_rfdm(&ramp_seq(), crop, ScaleMode::LinearMaxnorm).unwrap();
        assert_eq!(out.shape(), [2, 32, 32]);
        assert_eq!(out.max(), 1.0);
        assert_eq!(out.axes.zero_doppler, 16);
        assert_eq!(out.axes.range_offset, 0);
    }

    #[test]
    fn zero_sequence_maxnorm_passes_through() {
        let mut seq = ramp_seq();
        seq.data.fill(0.0);
        let crop = CropSpec {
            n_range: 8,
            n_doppler: 8,
            zone_center_m: 1.0,
        };
        let out = condition_rfdm(&seq, crop, ScaleMode::LinearMaxnorm).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
        let out = condition_rfdm(&seq, crop, ScaleMode::LogDb).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn log_db_spans_unit_interval() {
        let crop = CropSpec {
            n_range: 16,
            n_doppler: 16,
            zone_center_m: 20.0,
        };
        let out = condition_rfdm(&ramp_seq(), crop, ScaleMode::LogDb).unwrap();
        assert_eq!(out.max(), 1.0);
        assert_eq!(out.data.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(out.axes.range_offset, 25 - 8);
    }

    #[test]
    fn oversized_crop_is_size_error() {
        let crop = CropSpec {
            n_range: 129,
            n_doppler: 32,
            zone_center_m: 1.0,
        };
        assert!(matches!(
            condition_rfdm(&ramp_seq(), crop, ScaleMode::LinearMaxnorm),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let cfg = small_cfg();
        let cube = synthesize_cube(&cfg, &[Scatterer::moving(1.0, 0.7, 1.0)], 3, 1e-3, 5).unwrap();
        let a = preprocess(&cube, &DspConfig::default()).unwrap();
        let b = preprocess(&cube, &DspConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), [3, 32, 32]);
    }
}
