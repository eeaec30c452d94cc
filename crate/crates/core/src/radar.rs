//! FMCW chirp configuration, the IF beat-signal model and data-cube synthesis.
//!
//! A scatterer at range `R` delays the echo by `t_d = 2R/c`. After mixing and
//! low-pass filtering, the complex IF sample at fast time `t` within a chirp is
//!
//! ```text
//! s(t) = A * exp(j * (2*pi*k*t_d*t + 2*pi*f_c*t_d))
//! ```
//!
//! with slope `k = B / (n_samples / f_s)`. The residual `-pi*k*t_d^2` phase is
//! dropped. Chirp `l` of frame `f` starts at `f * t_frame + l * t_pri` and the
//! range is frozen for the duration of a chirp.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chirp and frame parameters. Defaults reproduce the IWR1642 acquisition setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub carrier_hz: f64,
    /// Bandwidth swept during the ADC sampling window.
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    pub n_chirps: usize,
    pub pri_s: f64,
    pub frame_s: f64,
    pub n_rx: usize,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 77.144e9,
            bandwidth_hz: 161.28e6,
            sample_rate_hz: 6.25e6,
            n_samples: 112,
            n_chirps: 128,
            pri_s: 32.92e-6,
            frame_s: 100e-3,
            n_rx: 1,
        }
    }
}

/// Quantities that follow from a [`RadarConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities {
    /// Frequency-modulation slope, Hz/s.
    pub slope: f64,
    pub sampling_window: f64,
    pub range_resolution: f64,
    pub max_range: f64,
    pub wavelength: f64,
    pub max_doppler_velocity: f64,
    pub doppler_resolution: f64,
}

pub const MAX_RX: usize = 4;

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz > 0", self.carrier_hz),
            ("bandwidth_hz > 0", self.bandwidth_hz),
            ("sample_rate_hz > 0", self.sample_rate_hz),
            ("pri_s > 0", self.pri_s),
            ("frame_s > 0", self.frame_s),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} violated (got {value})")));
            }
        }
        for (name, value) in [
            ("n_samples >= 1", self.n_samples),
            ("n_chirps >= 1", self.n_chirps),
            ("n_rx >= 1", self.n_rx),
        ] {
            if value < 1 {
                return Err(Error::Config(format!("{name} violated (got {value})")));
            }
        }
        if self.n_rx > MAX_RX {
            return Err(Error::Config(format!(
                "n_rx <= {MAX_RX} violated (got {})",
                self.n_rx
            )));
        }
        let window = self.sampling_window();
        if window > self.pri_s {
            return Err(Error::Config(format!(
                "sampling window n_samples/f_s = {window:e} s exceeds pri_s = {:e} s",
                self.pri_s
            )));
        }
        let burst = self.n_chirps as f64 * self.pri_s;
        if burst > self.frame_s {
            return Err(Error::Config(format!(
                "chirp burst n_chirps*pri_s = {burst:e} s exceeds frame_s = {:e} s",
                self.frame_s
            )));
        }
        Ok(())
    }

    pub fn sampling_window(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz
    }

    /// Slope `k = B / T_c` with `T_c` taken as the ADC sampling window.
    pub fn slope(&self) -> f64 {
        self.bandwidth_hz / self.sampling_window()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn derived(&self) -> Result<DerivedQuantities> {
        self.validate()?;
        let slope = self.slope();
        let wavelength = self.wavelength();
        Ok(DerivedQuantities {
            slope,
            sampling_window: self.sampling_window(),
            range_resolution: SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz),
            max_range: self.sample_rate_hz * SPEED_OF_LIGHT / (2.0 * slope),
            wavelength,
            max_doppler_velocity: wavelength / (4.0 * self.pri_s),
            doppler_resolution: wavelength / (2.0 * self.n_chirps as f64 * self.pri_s),
        })
    }

    /// Beat frequency of a static target at `range` metres.
    pub fn beat_frequency(&self, range: f64) -> f64 {
        self.slope() * 2.0 * range / SPEED_OF_LIGHT
    }

    /// Doppler shift of a target with radial velocity `velocity` (positive = receding).
    pub fn doppler_shift(&self, velocity: f64) -> f64 {
        2.0 * velocity / self.wavelength()
    }

    /// Slow time at which chirp `chirp` of frame `frame` is evaluated.
    pub fn chirp_time(&self, frame: usize, chirp: usize) -> f64 {
        frame as f64 * self.frame_s + chirp as f64 * self.pri_s
    }

    pub fn samples_per_frame(&self) -> usize {
        self.n_chirps * self.n_samples * self.n_rx
    }
}

/// Radial motion of a point scatterer: time (s) to (range m, radial velocity m/s).
pub trait Trajectory: fmt::Debug + Send + Sync {
    fn state(&self, t: f64) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Static {
    pub range: f64,
}

impl Trajectory for Static {
    fn state(&self, _t: f64) -> (f64, f64) {
        (self.range, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocity {
    pub range0: f64,
    pub velocity: f64,
}

impl Trajectory for ConstantVelocity {
    fn state(&self, t: f64) -> (f64, f64) {
        (self.range0 + self.velocity * t, self.velocity)
    }
}

#[derive(Debug, Clone)]
pub struct Scatterer {
    pub trajectory: Arc<dyn Trajectory>,
    /// Echo amplitude, linear.
    pub amplitude: f64,
}

impl Scatterer {
    pub fn new(trajectory: impl Trajectory + 'static, amplitude: f64) -> Self {
        Self {
            trajectory: Arc::new(trajectory),
            amplitude,
        }
    }

    pub fn fixed(range: f64, amplitude: f64) -> Self {
        Self::new(Static { range }, amplitude)
    }

    pub fn moving(range0: f64, velocity: f64, amplitude: f64) -> Self {
        Self::new(ConstantVelocity { range0, velocity }, amplitude)
    }

    pub fn state(&self, t: f64) -> (f64, f64) {
        self.trajectory.state(t)
    }
}

/// Raw complex IF samples indexed `[frame][chirp][sample][rx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    pub config: RadarConfig,
    pub n_frames: usize,
    pub samples: Vec<Complex64>,
}

impl DataCube {
    pub fn zeros(config: RadarConfig, n_frames: usize) -> Self {
        Self {
            config,
            n_frames,
            samples: vec![Complex64::new(0.0, 0.0); n_frames * config.samples_per_frame()],
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [
            self.n_frames,
            self.config.n_chirps,
            self.config.n_samples,
            self.config.n_rx,
        ]
    }

    #[inline]
    pub fn index(&self, frame: usize, chirp: usize, sample: usize, rx: usize) -> usize {
        let c = &self.config;
        ((frame * c.n_chirps + chirp) * c.n_samples + sample) * c.n_rx + rx
    }

    pub fn get(&self, frame: usize, chirp: usize, sample: usize, rx: usize) -> Complex64 {
        self.samples[self.index(frame, chirp, sample, rx)]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        let n = self.config.samples_per_frame();
        &self.samples[frame * n..(frame + 1) * n]
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.n_frames < 1 {
            return Err(Error::Size("data cube has no frames".into()));
        }
        let expected = self.n_frames * self.config.samples_per_frame();
        if self.samples.len() != expected {
            return Err(Error::Size(format!(
                "data cube holds {} samples, dimensions {:?} require {expected}",
                self.samples.len(),
                self.dims()
            )));
        }
        if let Some(i) = self.samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Data(format!("non-finite sample at flat index {i}")));
        }
        Ok(())
    }
}

/// One complex IF sample for a single scatterer.
pub fn if_signal_sample(
    config: &RadarConfig,
    scatterer: &Scatterer,
    t_fast: f64,
    t_slow: f64,
) -> Result<Complex64> {
    let window = config.sampling_window();
    if !(0.0..window).contains(&t_fast) {
        return Err(Error::Range(format!(
            "fast time {t_fast:e} s outside sampling window [0, {window:e})"
        )));
    }
    let (range, _) = scatterer.state(t_slow);
    let delay = 2.0 * range / SPEED_OF_LIGHT;
    let phase = 2.0 * PI * config.slope() * delay * t_fast + 2.0 * PI * config.carrier_hz * delay;
    Ok(Complex64::from_polar(scatterer.amplitude, phase))
}

fn check_scene(config: &RadarConfig, scene: &[Scatterer], n_frames: usize) -> Result<()> {
    let d = config.derived()?;
    for (i, s) in scene.iter().enumerate() {
        if !s.amplitude.is_finite() {
            return Err(Error::Simulation {
                scatterer: i,
                time: 0.0,
                reason: format!("non-finite amplitude {}", s.amplitude),
            });
        }
        for frame in 0..n_frames {
            for chirp in 0..config.n_chirps {
                let t = config.chirp_time(frame, chirp);
                let (r, v) = s.state(t);
                if !(r > 0.0 && r < d.max_range) {
                    return Err(Error::Simulation {
                        scatterer: i,
                        time: t,
                        reason: format!("range {r} m outside (0, {:.3}) m", d.max_range),
                    });
                }
                if !(v.abs() < d.max_doppler_velocity) {
                    return Err(Error::Simulation {
                        scatterer: i,
                        time: t,
                        reason: format!(
                            "velocity {v} m/s exceeds unambiguous limit {:.3} m/s",
                            d.max_doppler_velocity
                        ),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Synthesizes a data cube: the sum of every scatterer's IF signal plus
/// circular complex Gaussian noise with `E|n|^2 = noise_sigma^2`.
///
/// Noise for frame `f` is drawn from the sub-stream `("noise", f)` of
/// `rng_seed`, so frames can be synthesized in any order.
pub fn synthesize_cube(
    config: &RadarConfig,
    scene: &[Scatterer],
    n_frames: usize,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<DataCube> {
    if n_frames < 1 {
        return Err(Error::Size("n_frames must be >= 1".into()));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Param(format!("noise_sigma must be >= 0, got {noise_sigma}")));
    }
    check_scene(config, scene, n_frames)?;

    let per_frame = config.samples_per_frame();
    let mut cube = DataCube::zeros(*config, n_frames);
    cube.samples
        .par_chunks_mut(per_frame)
        .enumerate()
        .for_each(|(frame, buf)| {
            synthesize_frame(config, scene, frame, buf);
            if noise_sigma > 0.0 {
                add_noise(buf, noise_sigma, rng_seed, frame);
            }
        });
    Ok(cube)
}

fn synthesize_frame(config: &RadarConfig, scene: &[Scatterer], frame: usize, buf: &mut [Complex64]) {
    let slope = config.slope();
    let n_rx = config.n_rx;
    let dt = 1.0 / config.sample_rate_hz;
    for s in scene {
        for chirp in 0..config.n_chirps {
            let (range, _) = s.state(config.chirp_time(frame, chirp));
            let delay = 2.0 * range / SPEED_OF_LIGHT;
            let mut z = Complex64::from_polar(s.amplitude, 2.0 * PI * config.carrier_hz * delay);
            // Phase is linear in fast time: advance by a fixed rotation per sample.
            let step = Complex64::from_polar(1.0, 2.0 * PI * slope * delay * dt);
            let base = chirp * config.n_samples * n_rx;
            for n in 0..config.n_samples {
                let at = base + n * n_rx;
                for slot in &mut buf[at..at + n_rx] {
                    *slot += z;
                }
                z *= step;
            }
        }
    }
}

fn add_noise(buf: &mut [Complex64], sigma: f64, rng_seed: u64, frame: usize) {
    let mut rng = seed::rng(rng_seed, "noise", frame as u64);
    let normal = Normal::new(0.0, sigma / std::f64::consts::SQRT_2).expect("sigma validated");
    for z in buf.iter_mut() {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *z += Complex64::new(re, im);
    }
}

/// Draws a uniform value in `[lo, hi)`; helper shared by scene generators.
pub(crate) fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}
