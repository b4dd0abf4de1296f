use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trajectory::nominal_swing;
use crate::control::{AdmittanceParams, ReflexConfig};
use crate::error::{Error, Result};

/// Trot-like schedule: each cycle starts with swing and ends with stance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gait {
    pub period: f64,
    /// Fraction of the cycle spent in stance.
    pub duty_factor: f64,
    /// Time shift of the schedule (s).
    pub phase_offset: f64,
}

impl Default for Gait {
    fn default() -> Self {
        Self {
            period: 0.4,
            duty_factor: 0.5,
            phase_offset: 0.0,
        }
    }
}

impl Gait {
    pub fn swing_duration(&self) -> f64 {
        (1.0 - self.duty_factor) * self.period
    }

    pub fn stance_duration(&self) -> f64 {
        self.duty_factor * self.period
    }

    /// Cycle index and lift-off time of the cycle containing `t`.
    pub fn cycle_at(&self, t: f64) -> (i64, f64) {
        let k = ((t + self.phase_offset) / self.period).floor();
        (k as i64, k * self.period - self.phase_offset)
    }

    pub fn lift_off(&self, cycle: i64) -> f64 {
        cycle as f64 * self.period - self.phase_offset
    }
}

/// Swing reference parameters. The body walks along +x at `speed`; the step length
/// (ground distance between footholds) is `speed · period`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Reference {
    pub step_height: f64,
    pub speed: f64,
    /// Hip-frame (x, y) of the middle of the stance stroke (m).
    pub foot_center: [f64; 2],
    /// Depth of the stance target below the ground surface (m).
    pub preload: f64,
}

impl Default for Reference {
    fn default() -> Self {
        Self {
            step_height: 0.08,
            speed: 0.5,
            foot_center: [0.0, 0.08],
            preload: 0.01,
        }
    }
}

impl Reference {
    pub fn step_length(&self, gait: &Gait) -> f64 {
        self.speed * gait.period
    }

    /// Hip-frame distance the foot travels backwards during stance.
    pub fn stance_stroke(&self, gait: &Gait) -> f64 {
        self.speed * gait.stance_duration()
    }
}

/// Penalty ground: spring-damper along the normal, viscous friction clamped to the cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundModel {
    pub height: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub friction: f64,
    /// Tangential viscous coefficient before clamping (N·s/m).
    pub tangential_damping: f64,
}

impl Default for GroundModel {
    fn default() -> Self {
        Self {
            height: -0.30,
            stiffness: 30_000.0,
            damping: 200.0,
            friction: 0.8,
            tangential_damping: 300.0,
        }
    }
}

/// Thin block standing on the ground with its near face at ground-frame x = `position`.
/// It pushes back along −x while the foot is inside it and below its top.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Obstacle {
    pub position: f64,
    /// Height above the ground surface (m).
    pub height: f64,
    pub depth: f64,
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for Obstacle {
    fn default() -> Self {
        Self {
            position: 0.0,
            height: 0.09,
            depth: 0.03,
            stiffness: 20_000.0,
            damping: 50.0,
        }
    }
}

/// Standard deviations of the additive white sensor noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoise {
    pub q: f64,
    pub qd: f64,
    pub tau_m: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            q: 1e-4,
            qd: 1e-3,
            tau_m: 0.05,
        }
    }
}

impl SensorNoise {
    pub fn none() -> Self {
        Self {
            q: 0.0,
            qd: 0.0,
            tau_m: 0.0,
        }
    }
}

/// Multiplicative error of the estimator's model relative to the simulated leg.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelMismatch {
    pub mass_scale: f64,
}

impl Default for ModelMismatch {
    fn default() -> Self {
        Self { mass_scale: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Ac,
    #[default]
    Osc,
}

impl ControllerKind {
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::Ac => "AC",
            ControllerKind::Osc => "OSC",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ac" => Ok(ControllerKind::Ac),
            "osc" => Ok(ControllerKind::Osc),
            _ => Err(Error::InvalidArgument(format!("unknown controller `{s}`; valid: ac, osc"))),
        }
    }
}

/// Where the swing controller learns about collisions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionSource {
    /// Ground-truth contact state, seen after `detection_delay`.
    #[default]
    Truth,
    /// The in-loop IMM estimator running on the noisy readings.
    Estimator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Task-space tracking gains of the low-level foot controller.
    pub kp: f64,
    pub kd: f64,
    pub admittance: AdmittanceParams,
    pub reflex: ReflexConfig,
    pub detection: DetectionSource,
    pub detection_delay: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Osc,
            kp: 3000.0,
            kd: 60.0,
            admittance: AdmittanceParams::default(),
            reflex: ReflexConfig::default(),
            detection: DetectionSource::Truth,
            detection_delay: 0.015,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub duration: f64,
    pub dt: f64,
    /// Integration substeps per tick; torque is held over the tick.
    pub substeps: usize,
    pub gait: Gait,
    pub reference: Reference,
    pub ground: GroundModel,
    pub obstacles: Vec<Obstacle>,
    pub sensor_noise: SensorNoise,
    pub model_mismatch: ModelMismatch,
    pub controller: ControllerConfig,
    pub seed: u64,
    /// Explicit initial joint state; by default the leg starts on the reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::collision_course(3, 7)
    }
}

impl Scenario {
    fn base() -> Self {
        Self {
            duration: 1.0,
            dt: 1e-3,
            substeps: 10,
            gait: Gait::default(),
            reference: Reference::default(),
            ground: GroundModel::default(),
            obstacles: Vec::new(),
            sensor_noise: SensorNoise::default(),
            model_mismatch: ModelMismatch::default(),
            controller: ControllerConfig::default(),
            seed: 0,
            initial: None,
        }
    }

    /// Free walking without obstacles.
    pub fn walking(duration: f64, seed: u64) -> Self {
        Self {
            duration,
            seed,
            ..Self::base()
        }
    }

    /// `count` obstacles, one in every other stride starting with the second, each
    /// placed so the nominal swing foot meets it at a random swing phase in [0.15, 0.4].
    pub fn collision_course(count: usize, seed: u64) -> Self {
        let mut sc = Self { seed, ..Self::base() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b57_ac1e);
        for i in 0..count {
            let cycle = 1 + 2 * i as i64;
            let phase = rng.gen_range(0.15..0.4);
            let hit = nominal_swing(&sc.gait, &sc.reference, sc.ground.height, cycle).eval(phase).pos;
            sc.obstacles.push(Obstacle {
                position: hit.x,
                ..Obstacle::default()
            });
        }
        sc.duration = (2 * count + 1) as f64 * sc.gait.period + 0.1;
        sc
    }

    /// A single obstacle hit at the given swing phase of the second stride.
    pub fn single_collision(phase: f64, seed: u64) -> Self {
        let mut sc = Self { seed, ..Self::base() };
        let hit = nominal_swing(&sc.gait, &sc.reference, sc.ground.height, 1).eval(phase).pos;
        sc.obstacles.push(Obstacle {
            position: hit.x,
            ..Obstacle::default()
        });
        sc.duration = 3.0 * sc.gait.period;
        sc
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(text).map_err(|e| Error::config("scenario", e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn ticks(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| if ok { Ok(()) } else { Err(Error::config(field, msg)) };
        check(self.dt > 0.0 && self.dt.is_finite(), "dt", "must be positive")?;
        check(self.substeps >= 1, "substeps", "must be at least 1")?;
        check(self.duration >= self.dt, "duration", "must cover at least one tick")?;
        check(self.gait.period > 0.0, "gait.period", "must be positive")?;
        check(self.gait.duty_factor > 0.0 && self.gait.duty_factor < 1.0, "gait.duty_factor", "must lie in (0, 1)")?;
        check(self.reference.step_height > 0.0, "reference.step_height", "must be positive")?;
        check(self.reference.speed >= 0.0, "reference.speed", "must be non-negative")?;
        check(self.reference.preload >= 0.0, "reference.preload", "must be non-negative")?;
        let g = &self.ground;
        check(g.stiffness >= 0.0 && g.damping >= 0.0 && g.tangential_damping >= 0.0, "ground", "stiffness and damping must be non-negative")?;
        check(g.friction >= 0.0, "ground.friction", "must be non-negative")?;
        for (i, o) in self.obstacles.iter().enumerate() {
            check(o.stiffness >= 0.0 && o.damping >= 0.0, &format!("obstacles[{i}]"), "stiffness and damping must be non-negative")?;
            check(o.height > 0.0 && o.depth > 0.0, &format!("obstacles[{i}]"), "height and depth must be positive")?;
        }
        let n = &self.sensor_noise;
        check(n.q >= 0.0 && n.qd >= 0.0 && n.tau_m >= 0.0, "sensor_noise", "standard deviations must be non-negative")?;
        check(self.model_mismatch.mass_scale > 0.0, "model_mismatch.mass_scale", "must be positive")?;
        let c = &self.controller;
        check(c.kp >= 0.0 && c.kd >= 0.0, "controller", "gains must be non-negative")?;
        check(c.detection_delay >= 0.0, "controller.detection_delay", "must be non-negative")?;
        c.admittance.validate()?;
        c.reflex.validate()?;
        Ok(())
    }
}
