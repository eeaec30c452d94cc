//! Parametric hand-gesture scenes and labelled dataset generation.
//!
//! Each gesture class is a radial template `r(tau)` over normalised active
//! time `tau` in `[0, 1]`, added to the placement's base range. Only radial
//! motion reaches a range-Doppler pipeline, so the templates are chosen to be
//! radially distinguishable:
//!
//! | class              | radial template (unit extent)             | active time |
//! |--------------------|-------------------------------------------|-------------|
//! | Push / Pull        | ramp `+-0.15 * (1 - 2 s(tau))`            | 0.6 s       |
//! | SwipeLeft / Right  | `+-0.10 * cos(az) * sin(2 pi tau)`        | 0.8 s       |
//! | SwipeUp / Down     | ramp `-+0.05 * (1 - 2 s(tau))`            | 0.3 s       |
//! | Circle             | `0.10 * cos(2 pi tau)`                    | 1.0 s       |
//!
//! where `s(tau) = (1 - cos(pi tau)) / 2`. Active time is divided by the
//! user's speed scale; the hand holds still before and after.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{self, synthesize_cube, DataCube, RadarConfig, Scatterer, Trajectory};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureClass {
    SwipeLeft,
    SwipeRight,
    SwipeUp,
    SwipeDown,
    Push,
    Pull,
    Circle,
}

pub const NUM_CLASSES: usize = 7;

impl GestureClass {
    pub const ALL: [GestureClass; NUM_CLASSES] = [
        GestureClass::SwipeLeft,
        GestureClass::SwipeRight,
        GestureClass::SwipeUp,
        GestureClass::SwipeDown,
        GestureClass::Push,
        GestureClass::Pull,
        GestureClass::Circle,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("listed")
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or(Error::Index { index: i, len: NUM_CLASSES })
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::SwipeLeft => "SwipeLeft",
            GestureClass::SwipeRight => "SwipeRight",
            GestureClass::SwipeUp => "SwipeUp",
            GestureClass::SwipeDown => "SwipeDown",
            GestureClass::Push => "Push",
            GestureClass::Pull => "Pull",
            GestureClass::Circle => "Circle",
        }
    }

    /// Active motion time at unit speed, seconds.
    pub fn active_duration(self) -> f64 {
        match self {
            GestureClass::Push | GestureClass::Pull => 0.6,
            GestureClass::SwipeLeft | GestureClass::SwipeRight => 0.8,
            GestureClass::SwipeUp | GestureClass::SwipeDown => 0.3,
            GestureClass::Circle => 1.0,
        }
    }

    fn tangential(self) -> bool {
        matches!(self, GestureClass::SwipeLeft | GestureClass::SwipeRight)
    }

    /// Radial offset (m) and its derivative with respect to `tau`, at unit extent.
    pub fn template(self, tau: f64) -> (f64, f64) {
        let tau = tau.clamp(0.0, 1.0);
        let ramp = (1.0 - (PI * tau).cos()) / 2.0;
        let ramp_d = PI * (PI * tau).sin() / 2.0;
        let (sin2, cos2) = (2.0 * PI * tau).sin_cos();
        match self {
            GestureClass::Push => (0.15 * (1.0 - 2.0 * ramp), -0.3 * ramp_d),
            GestureClass::Pull => (-0.15 * (1.0 - 2.0 * ramp), 0.3 * ramp_d),
            GestureClass::SwipeUp => (-0.05 * (1.0 - 2.0 * ramp), 0.1 * ramp_d),
            GestureClass::SwipeDown => (0.05 * (1.0 - 2.0 * ramp), -0.1 * ramp_d),
            GestureClass::SwipeLeft => (0.1 * sin2, 0.2 * PI * cos2),
            GestureClass::SwipeRight => (-0.1 * sin2, -0.2 * PI * cos2),
            GestureClass::Circle => (0.1 * cos2, -0.2 * PI * sin2),
        }
    }

    /// Largest `|r(tau)|` of the template at unit extent.
    fn reach(self) -> f64 {
        match self {
            GestureClass::Push | GestureClass::Pull => 0.15,
            GestureClass::SwipeUp | GestureClass::SwipeDown => 0.05,
            _ => 0.1,
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Manifest(format!("unknown gesture class {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Environment {
    Classroom,
    Office,
    ConferenceHall,
}

impl Environment {
    pub const ALL: [Environment; 3] = [Environment::Classroom, Environment::Office, Environment::ConferenceHall];

    /// Clutter scatterer count and nominal reflectivity.
    pub fn clutter_preset(self) -> (usize, f64) {
        match self {
            Environment::Classroom => (8, 0.5),
            Environment::Office => (12, 0.8),
            Environment::ConferenceHall => (4, 0.3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Environment::Classroom => "Classroom",
            Environment::Office => "Office",
            Environment::ConferenceHall => "ConferenceHall",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePlacement {
    pub base_range: f64,
    pub azimuth_deg: f64,
    pub environment: Environment,
}

impl ScenePlacement {
    pub fn validate(&self) -> Result<()> {
        if !(0.3..=2.0).contains(&self.base_range) {
            return Err(Error::Placement(format!(
                "base_range {} m outside [0.3, 2.0]",
                self.base_range
            )));
        }
        if !(self.azimuth_deg.abs() <= 60.0) {
            return Err(Error::Placement(format!(
                "azimuth {} deg outside [-60, 60]",
                self.azimuth_deg
            )));
        }
        Ok(())
    }

    /// Location key `(range, azimuth)` used to group samples by position.
    pub fn location_key(&self) -> (f64, f64) {
        (self.base_range, self.azimuth_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    pub speed_scale: f64,
    pub amplitude_scale: f64,
    pub extent_scale: f64,
    /// Per-chirp radial jitter standard deviation, metres.
    pub jitter_sigma: f64,
}

impl Default for UserProfile {
    fn default() -> Self {
        Self::unit()
    }
}

impl UserProfile {
    pub fn unit() -> Self {
        Self {
            speed_scale: 1.0,
            amplitude_scale: 1.0,
            extent_scale: 1.0,
            jitter_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("speed_scale", self.speed_scale),
            ("amplitude_scale", self.amplitude_scale),
            ("extent_scale", self.extent_scale),
        ] {
            if !(0.5..=1.5).contains(&v) {
                return Err(Error::Param(format!("{name} = {v} outside [0.5, 1.5]")));
            }
        }
        if !(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0) {
            return Err(Error::Param(format!("jitter_sigma = {} must be >= 0", self.jitter_sigma)));
        }
        Ok(())
    }

    /// Draws `n` synthetic users with scales in `[1 - spread, 1 + spread]`.
    pub fn draw(n: usize, spread: f64, master_seed: u64) -> Vec<UserProfile> {
        (0..n)
            .map(|i| {
                let mut rng = seed::rng(master_seed, "user", i as u64);
                let mut scale = || radar::uniform(&mut rng, 1.0 - spread, 1.0 + spread);
                UserProfile {
                    speed_scale: scale(),
                    amplitude_scale: scale(),
                    extent_scale: scale(),
                    jitter_sigma: 0.0,
                }
            })
            .collect()
    }
}

/// Timing and range limits a scene must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneContext {
    /// Span of slow time covered by the capture, seconds.
    pub window_s: f64,
    pub max_range: f64,
}

impl SceneContext {
    pub fn new(config: &RadarConfig, n_frames: usize) -> Result<Self> {
        let d = config.derived()?;
        Ok(Self {
            window_s: config.chirp_time(n_frames.saturating_sub(1), config.n_chirps - 1),
            max_range: d.max_range,
        })
    }
}

/// Radial motion of one hand point following a class template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandMotion {
    pub class: GestureClass,
    pub center: f64,
    /// Multiplier on the template, including any `cos(azimuth)` projection.
    pub gain: f64,
    pub t_start: f64,
    pub duration: f64,
    pub jitter_sigma: f64,
    pub jitter_seed: u64,
}

impl HandMotion {
    /// Range and velocity without jitter.
    pub fn nominal(&self, t: f64) -> (f64, f64) {
        let tau = (t - self.t_start) / self.duration;
        let (r, dr) = self.class.template(tau);
        let v = if (0.0..=1.0).contains(&tau) {
            self.gain * dr / self.duration
        } else {
            0.0
        };
        (self.center + self.gain * r, v)
    }
}

impl Trajectory for HandMotion {
    fn state(&self, t: f64) -> (f64, f64) {
        let (r, v) = self.nominal(t);
        if self.jitter_sigma == 0.0 {
            return (r, v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.jitter_seed ^ t.to_bits());
        let z: f64 = StandardNormal.sample(&mut rng);
        (r + self.jitter_sigma * z, v)
    }
}

/// Provenance labels attached to every generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneLabels {
    pub user_id: usize,
    pub location_id: usize,
    pub environment: Environment,
}

#[derive(Debug, Clone)]
pub struct GestureScene {
    pub class: GestureClass,
    pub placement: ScenePlacement,
    pub user: UserProfile,
    /// Motion of the hand centre; hand points are offset copies of it.
    pub hand: HandMotion,
    pub n_hand_points: usize,
    pub scatterers: Vec<Scatterer>,
    pub labels: SceneLabels,
}

impl GestureScene {
    /// Hand-centre range at each time in `times`.
    pub fn radial_trace(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.hand.nominal(t).0).collect()
    }

    pub fn clutter(&self) -> &[Scatterer] {
        &self.scatterers[self.n_hand_points..]
    }
}

const HAND_OFFSET_M: f64 = 0.03;
const START_JITTER_S: f64 = 0.15;
/// Relative spread of speed and extent between repetitions by the same user.
const REPETITION_SPREAD: f64 = 0.1;

/// Builds one gesture scene: a 3-5 point hand following the class template
/// plus static clutter from the environment preset. Each repetition scales the
/// user's speed and extent by a further factor in `[0.9, 1.1]`.
pub fn make_gesture_scene(
    class: GestureClass,
    placement: ScenePlacement,
    user: UserProfile,
    labels: SceneLabels,
    ctx: SceneContext,
    rng_seed: u64,
) -> Result<GestureScene> {
    placement.validate()?;
    user.validate()?;
    let mut rng = seed::rng(rng_seed, "scene", 0);
    let speed = user.speed_scale * radar::uniform(&mut rng, 1.0 - REPETITION_SPREAD, 1.0 + REPETITION_SPREAD);
    let extent = user.extent_scale * radar::uniform(&mut rng, 1.0 - REPETITION_SPREAD, 1.0 + REPETITION_SPREAD);

    let gain = if class.tangential() {
        extent * placement.azimuth_deg.to_radians().cos()
    } else {
        extent
    };
    let duration = class.active_duration() / speed;
    if duration > ctx.window_s {
        return Err(Error::Placement(format!(
            "{class} lasts {duration:.3} s, longer than the {:.3} s capture",
            ctx.window_s
        )));
    }
    let slack = (ctx.window_s - duration) / 2.0;
    let shift = radar::uniform(&mut rng, -START_JITTER_S, START_JITTER_S).clamp(-slack, slack);
    let t_start = slack + shift;

    let lo = placement.base_range - class.reach() * gain - HAND_OFFSET_M;
    let hi = placement.base_range + class.reach() * gain + HAND_OFFSET_M;
    if lo < 0.3 || hi >= ctx.max_range {
        return Err(Error::Placement(format!(
            "{class} at {} m sweeps [{lo:.3}, {hi:.3}] m, outside [0.3, {:.3})",
            placement.base_range, ctx.max_range
        )));
    }

    let hand = HandMotion {
        class,
        center: placement.base_range,
        gain,
        t_start,
        duration,
        jitter_sigma: user.jitter_sigma,
        jitter_seed: 0,
    };
    let n_hand_points = rng.random_range(3..=5);
    let mut scatterers = Vec::with_capacity(n_hand_points + 12);
    for i in 0..n_hand_points {
        let point = HandMotion {
            center: placement.base_range + radar::uniform(&mut rng, -HAND_OFFSET_M, HAND_OFFSET_M),
            jitter_seed: seed::derive(rng_seed, "jitter", i as u64),
            ..hand
        };
        let amplitude = 0.5 * user.amplitude_scale * radar::uniform(&mut rng, 0.6, 1.0);
        scatterers.push(Scatterer::new(point, amplitude));
    }
    let (count, reflectivity) = placement.environment.clutter_preset();
    for _ in 0..count {
        let range = radar::uniform(&mut rng, 0.4, 12.0f64.min(ctx.max_range * 0.9));
        let amplitude = reflectivity * radar::uniform(&mut rng, 0.8, 1.2);
        scatterers.push(Scatterer::fixed(range, amplitude));
    }

    Ok(GestureScene {
        class,
        placement,
        user,
        hand,
        n_hand_points,
        scatterers,
        labels,
    })
}

/// What to generate: the product classes x users x placements x instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub instances_per_class: usize,
    pub users: Vec<UserProfile>,
    pub placements: Vec<ScenePlacement>,
    pub n_frames: usize,
    pub noise_sigma: f64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.instances_per_class == 0 || self.users.is_empty() || self.placements.is_empty() {
            return Err(Error::Config(
                "dataset needs >= 1 instance per class, user and placement".into(),
            ));
        }
        if self.n_frames == 0 {
            return Err(Error::Config("n_frames must be >= 1".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise_sigma = {} must be >= 0", self.noise_sigma)));
        }
        for u in &self.users {
            u.validate()?;
        }
        for p in &self.placements {
            p.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        NUM_CLASSES * self.instances_per_class * self.users.len() * self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Provenance of one generated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub index: usize,
    pub class: GestureClass,
    pub user_id: usize,
    pub location_id: usize,
    pub placement: ScenePlacement,
    pub instance: usize,
    pub seed: u64,
}

impl SampleMeta {
    pub fn labels(&self) -> SceneLabels {
        SceneLabels {
            user_id: self.user_id,
            location_id: self.location_id,
            environment: self.placement.environment,
        }
    }
}

/// Enumerates every sample of `spec` with its derived seed, without rendering.
pub fn dataset_plan(spec: &DatasetSpec, rng_seed: u64) -> Result<Vec<SampleMeta>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.len());
    for user_id in 0..spec.users.len() {
        for (location_id, placement) in spec.placements.iter().enumerate() {
            for class in GestureClass::ALL {
                for instance in 0..spec.instances_per_class {
                    let index = out.len();
                    out.push(SampleMeta {
                        index,
                        class,
                        user_id,
                        location_id,
                        placement: *placement,
                        instance,
                        seed: seed::derive(rng_seed, "gen", index as u64),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Builds the scene for one planned sample.
pub fn scene_for(meta: &SampleMeta, spec: &DatasetSpec, config: &RadarConfig) -> Result<GestureScene> {
    let user = *spec
        .users
        .get(meta.user_id)
        .ok_or(Error::Index { index: meta.user_id, len: spec.users.len() })?;
    let ctx = SceneContext::new(config, spec.n_frames)?;
    make_gesture_scene(meta.class, meta.placement, user, meta.labels(), ctx, meta.seed)
}

/// Renders one planned sample to a data cube.
pub fn render_sample(meta: &SampleMeta, spec: &DatasetSpec, config: &RadarConfig) -> Result<DataCube> {
    let run = || -> Result<DataCube> {
        let scene = scene_for(meta, spec, config)?;
        synthesize_cube(
            config,
            &scene.scatterers,
            spec.n_frames,
            spec.noise_sigma,
            seed::derive(meta.seed, "noise", 0),
        )
    };
    run().map_err(|e| {
        e.context(format!(
            "sample {} ({}, user {}, location {}, {})",
            meta.index,
            meta.class,
            meta.user_id,
            meta.location_id,
            meta.placement.environment.name()
        ))
    })
}

/// Generates every cube of `spec` in memory, in plan order.
pub fn generate_dataset(
    spec: &DatasetSpec,
    config: &RadarConfig,
    rng_seed: u64,
) -> Result<Vec<(DataCube, SampleMeta)>> {
    let plan = dataset_plan(spec, rng_seed)?;
    plan.par_iter()
        .map(|meta| Ok((render_sample(meta, spec, config)?, *meta)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> SceneContext {
        SceneContext::new(&RadarConfig::default(), 16).unwrap()
    }

    fn placement(range: f64, az: f64) -> ScenePlacement {
        ScenePlacement {
            base_range: range,
            azimuth_deg: az,
            environment: Environment::Classroom,
        }
    }

    fn labels() -> SceneLabels {
        SceneLabels {
            user_id: 0,
            location_id: 0,
            environment: Environment::Classroom,
        }
    }

    fn times(ctx: SceneContext, n: usize) -> Vec<f64> {
        (0..n).map(|i| ctx.window_s * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn class_names_round_trip() {
        for c in GestureClass::ALL {
            assert_eq!(c.name().parse::<GestureClass>().unwrap(), c);
            assert_eq!(GestureClass::from_index(c.index()).unwrap(), c);
        }
        assert!("Wave".parse::<GestureClass>().is_err());
        assert_eq!(
            serde_json::to_string(&GestureClass::SwipeLeft).unwrap(),
            "\"SwipeLeft\""
        );
    }

    #[test]
    fn push_ramps_down_and_pull_mirrors_it() {
        let user = UserProfile {
            extent_scale: 1.2,
            ..UserProfile::unit()
        };
        let push = make_gesture_scene(GestureClass::Push, placement(0.75, 0.0), user, labels(), ctx(), 3).unwrap();
        let pull = make_gesture_scene(GestureClass::Pull, placement(0.75, 0.0), user, labels(), ctx(), 3).unwrap();
        let ts = times(ctx(), 400);
        let a = push.radial_trace(&ts);
        let b = pull.radial_trace(&ts);
        assert!(a.windows(2).all(|w| w[1] <= w[0]));
        // The repetition factor keeps the extent within 10% of the user's.
        let g = push.hand.gain;
        assert!((g / 1.2 - 1.0).abs() <= 0.1);
        assert!((a[0] - (0.75 + 0.15 * g)).abs() < 1e-12);
        assert!((a[a.len() - 1] - (0.75 - 0.15 * g)).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!(((x - 0.75) + (y - 0.75)).abs() < 1e-12);
        }
    }

    #[test]
    fn swipes_are_time_reversals() {
        let c = ctx();
        let left = make_gesture_scene(GestureClass::SwipeLeft, placement(1.0, 0.0), UserProfile::unit(), labels(), c, 9)
            .unwrap();
        let right = make_gesture_scene(GestureClass::SwipeRight, placement(1.0, 0.0), UserProfile::unit(), labels(), c, 9)
            .unwrap();
        // Compare on each scene's own active window, tau and 1 - tau.
        for i in 0..=50 {
            let tau = i as f64 / 50.0;
            let tl = left.hand.t_start + tau * left.hand.duration;
            let tr = right.hand.t_start + (1.0 - tau) * right.hand.duration;
            assert!((left.hand.nominal(tl).0 - right.hand.nominal(tr).0).abs() < 1e-12);
        }
    }

    #[test]
    fn template_velocities_match_finite_differences() {
        for c in GestureClass::ALL {
            for i in 1..20 {
                let tau = i as f64 / 20.0;
                let h = 1e-6;
                let fd = (c.template(tau + h).0 - c.template(tau - h).0) / (2.0 * h);
                assert!((fd - c.template(tau).1).abs() < 1e-6, "{c} at {tau}");
            }
        }
    }

    #[test]
    fn mirror_pairs_have_opposite_velocity_sign() {
        let c = ctx();
        let mean_v = |class| {
            let s = make_gesture_scene(class, placement(1.0, 0.0), UserProfile::unit(), labels(), c, 1).unwrap();
            let ts = times(c, 200);
            ts.iter().map(|&t| s.hand.nominal(t).1).sum::<f64>() / ts.len() as f64
        };
        assert!(mean_v(GestureClass::Push) < 0.0 && mean_v(GestureClass::Pull) > 0.0);
        assert!(mean_v(GestureClass::SwipeDown) < 0.0 && mean_v(GestureClass::SwipeUp) > 0.0);
        // Left/right share a zero mean velocity; the sign of the first lobe differs.
        let first_lobe = |class| {
            let s = make_gesture_scene(class, placement(1.0, 0.0), UserProfile::unit(), labels(), c, 1).unwrap();
            s.hand.nominal(s.hand.t_start + 0.1 * s.hand.duration).1
        };
        assert!(first_lobe(GestureClass::SwipeLeft) > 0.0);
        assert!(first_lobe(GestureClass::SwipeRight) < 0.0);
    }

    #[test]
    fn scenes_are_deterministic() {
        let mk = || {
            make_gesture_scene(GestureClass::Circle, placement(1.2, 20.0), UserProfile::unit(), labels(), ctx(), 77)
                .unwrap()
        };
        let (a, b) = (mk(), mk());
        assert_eq!(a.n_hand_points, b.n_hand_points);
        let ts = times(ctx(), 64);
        for (sa, sb) in a.scatterers.iter().zip(&b.scatterers) {
            assert_eq!(sa.amplitude, sb.amplitude);
            for &t in &ts {
                assert_eq!(sa.state(t), sb.state(t));
            }
        }
    }

    #[test]
    fn clutter_is_static_and_counted() {
        for env in Environment::ALL {
            let p = ScenePlacement {
                environment: env,
                ..placement(1.0, 0.0)
            };
            let s = make_gesture_scene(GestureClass::Push, p, UserProfile::unit(), labels(), ctx(), 5).unwrap();
            assert!((3..=5).contains(&s.n_hand_points));
            assert_eq!(s.clutter().len(), env.clutter_preset().0);
            for c in s.clutter() {
                assert_eq!(c.state(0.0), c.state(1.3));
                assert_eq!(c.state(0.4).1, 0.0);
            }
        }
    }

    #[test]
    fn placement_too_close_is_rejected() {
        let user = UserProfile {
            extent_scale: 1.5,
            ..UserProfile::unit()
        };
        let err = make_gesture_scene(GestureClass::Push, placement(0.3, 0.0), user, labels(), ctx(), 0).unwrap_err();
        assert!(matches!(err, Error::Placement(_)));
        assert!(placement(2.5, 0.0).validate().is_err());
        assert!(placement(1.0, 75.0).validate().is_err());
    }

    #[test]
    fn user_profile_bounds() {
        assert!(UserProfile { speed_scale: 1.6, ..UserProfile::unit() }.validate().is_err());
        assert!(UserProfile { jitter_sigma: -1.0, ..UserProfile::unit() }.validate().is_err());
        for u in UserProfile::draw(5, 0.2, 3) {
            u.validate().unwrap();
        }
    }

    #[test]
    fn jitter_is_a_pure_function_of_time() {
        let h = HandMotion {
            class: GestureClass::Push,
            center: 1.0,
            gain: 1.0,
            t_start: 0.2,
            duration: 0.6,
            jitter_sigma: 1e-4,
            jitter_seed: 42,
        };
        assert_eq!(h.state(0.5), h.state(0.5));
        assert_ne!(h.state(0.5).0, h.nominal(0.5).0);
        assert!((h.state(0.5).0 - h.nominal(0.5).0).abs() < 1e-3);
    }

    fn spec(instances: usize, users: usize, placements: usize) -> DatasetSpec {
        DatasetSpec {
            instances_per_class: instances,
            users: vec![UserProfile::unit(); users],
            placements: (0..placements).map(|i| placement(0.75 + 0.25 * i as f64, 0.0)).collect(),
            n_frames: 2,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn plan_sizes_and_balance() {
        assert_eq!(dataset_plan(&spec(1, 1, 1), 0).unwrap().len(), 7);
        let plan = dataset_plan(&spec(30, 2, 5), 0).unwrap();
        assert_eq!(plan.len(), 2100);
        let mut hist = [0usize; NUM_CLASSES];
        for m in &plan {
            hist[m.class.index()] += 1;
        }
        assert!(hist.iter().all(|&h| h == 300));
        let seeds: std::collections::HashSet<_> = plan.iter().map(|m| m.seed).collect();
        assert_eq!(seeds.len(), plan.len());
    }

    #[test]
    fn generated_cubes_are_valid() {
        let cfg = RadarConfig {
            n_chirps: 16,
            ..Default::default()
        };
        let mut ds = spec(1, 1, 1);
        ds.n_frames = 16;
        let data = generate_dataset(&ds, &cfg, 4).unwrap();
        assert_eq!(data.len(), 7);
        for (cube, meta) in &data {
            cube.validate().unwrap();
            assert_eq!(cube.n_frames, 16);
            assert_eq!(meta.index, data.iter().position(|(_, m)| m == meta).unwrap());
        }
    }

    #[test]
    fn empty_spec_is_rejected() {
        assert!(dataset_plan(&spec(0, 1, 1), 0).is_err());
        let mut s = spec(1, 1, 1);
        s.users.clear();
        assert!(dataset_plan(&s, 0).is_err());
    }
}
