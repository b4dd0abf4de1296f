//! A common interface over the four contact observers and the JSON document that
//! configures them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{JointReading, LegModel};
use crate::error::{Error, Result};
use crate::imm::{ImmEstimator, ImmSettings};
use crate::observers::{ConeClassifier, ContactMode, FoMbo, ModeCones, MomentumKf, NoiseConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObserverKind {
    #[serde(rename = "fo-mbo")]
    FoMbo,
    #[serde(rename = "mbko")]
    Mbko,
    #[serde(rename = "pm-mbko")]
    PmMbko,
    #[serde(rename = "imm-mbko")]
    ImmMbko,
}

impl ObserverKind {
    pub const ALL: [ObserverKind; 4] = [ObserverKind::FoMbo, ObserverKind::Mbko, ObserverKind::PmMbko, ObserverKind::ImmMbko];

    pub fn name(self) -> &'static str {
        match self {
            ObserverKind::FoMbo => "fo-mbo",
            ObserverKind::Mbko => "mbko",
            ObserverKind::PmMbko => "pm-mbko",
            ObserverKind::ImmMbko => "imm-mbko",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ObserverKind::FoMbo => "FO-MBO",
            ObserverKind::Mbko => "MBKO",
            ObserverKind::PmMbko => "PM-MBKO",
            ObserverKind::ImmMbko => "IMM-MBKO",
        }
    }

    /// Parses a comma-separated list; `all` selects every observer.
    pub fn parse_list(list: &str) -> Result<Vec<ObserverKind>> {
        if list.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let kind: ObserverKind = item.parse()?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("observer list is empty".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for ObserverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObserverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s.to_ascii_lowercase()).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::InvalidArgument(format!("unknown observer `{s}`; valid names: {}", valid.join(", ")))
        })
    }
}

/// Collision force magnitude each baseline needs before its cone rule reports a collision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineThresholds {
    pub fo_mbo: f64,
    pub mbko: f64,
    pub pm_mbko: f64,
    pub dwell: usize,
}

impl Default for BaselineThresholds {
    fn default() -> Self {
        Self {
            fo_mbo: 20.0,
            mbko: 20.0,
            pm_mbko: 20.0,
            dwell: 2,
        }
    }
}

/// Everything an observer needs besides the leg model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub dt: f64,
    /// Noise of the IMM filter bank.
    pub noise: NoiseConfig,
    /// Noise of the single-filter MBKO and PM-MBKO baselines.
    pub baseline_noise: NoiseConfig,
    pub cones: ModeCones,
    pub imm: ImmSettings,
    /// First-order observer gain (1/s).
    pub fo_mbo_gain: f64,
    /// Variance of the static pseudo-force measurement of PM-MBKO (N²).
    pub pm_force_variance: f64,
    pub baseline: BaselineThresholds,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let baseline_noise = NoiseConfig::reference();
        Self {
            dt: 1e-3,
            pm_force_variance: baseline_noise.v_f_small,
            noise: NoiseConfig::default(),
            baseline_noise,
            cones: ModeCones::default(),
            imm: ImmSettings::default(),
            fo_mbo_gain: 50.0,
            baseline: BaselineThresholds::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("estimator config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("dt", "must be positive"));
        }
        self.noise.validate()?;
        self.baseline_noise.validate()?;
        self.cones.validate()?;
        self.imm.validate()?;
        if !(self.fo_mbo_gain > 0.0) {
            return Err(Error::config("fo_mbo_gain", "must be positive"));
        }
        if !(self.pm_force_variance > 0.0) {
            return Err(Error::config("pm_force_variance", "must be positive"));
        }
        let b = &self.baseline;
        if [b.fo_mbo, b.mbko, b.pm_mbko].iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::config("baseline", "thresholds must be non-negative"));
        }
        Ok(())
    }

    fn baseline_classifier(&self, threshold: f64) -> ConeClassifier {
        let mut cones = self.cones.clone();
        cones.collision.min_magnitude = threshold;
        ConeClassifier::new(cones, self.baseline.dwell)
    }

    pub fn build(&self, kind: ObserverKind, model_hat: &LegModel) -> Result<Box<dyn ContactObserver>> {
        self.validate()?;
        let p0 = self.imm.initial_covariance(model_hat.n_dof);
        Ok(match kind {
            ObserverKind::FoMbo => Box::new(ClassifiedFoMbo {
                inner: FoMbo::new(model_hat.clone(), self.fo_mbo_gain, self.dt)?,
                classifier: self.baseline_classifier(self.baseline.fo_mbo),
            }),
            ObserverKind::Mbko => Box::new(ClassifiedKf {
                kind,
                inner: MomentumKf::new(model_hat.clone(), self.baseline_noise.clone(), None, p0, self.dt)?,
                classifier: self.baseline_classifier(self.baseline.mbko),
            }),
            ObserverKind::PmMbko => Box::new(ClassifiedKf {
                kind,
                inner: MomentumKf::new(model_hat.clone(), self.baseline_noise.clone(), Some(self.pm_force_variance), p0, self.dt)?,
                classifier: self.baseline_classifier(self.baseline.pm_mbko),
            }),
            ObserverKind::ImmMbko => Box::new(ImmEstimator::new(
                model_hat.clone(),
                self.noise.clone(),
                self.cones.clone(),
                self.imm.clone(),
                self.dt,
            )?),
        })
    }
}

/// One observer tick: force estimate and discrete contact mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ObserverOutput {
    pub t: f64,
    pub force: Vector3<f64>,
    pub mode: ContactMode,
    /// Generalized momentum estimate, for observers that carry it as state.
    pub momentum: Option<DVector<f64>>,
    /// Mode probabilities, for observers that maintain them.
    pub mu: Option<[f64; 3]>,
}

pub trait ContactObserver: Send {
    fn kind(&self) -> ObserverKind;
    fn observe(&mut self, reading: &JointReading) -> Result<ObserverOutput>;
}

struct ClassifiedFoMbo {
    inner: FoMbo,
    classifier: ConeClassifier,
}

impl ContactObserver for ClassifiedFoMbo {
    fn kind(&self) -> ObserverKind {
        ObserverKind::FoMbo
    }

    fn observe(&mut self, reading: &JointReading) -> Result<ObserverOutput> {
        let force = self.inner.step(reading)?;
        check_finite(self.kind(), &force)?;
        Ok(ObserverOutput {
            t: reading.t,
            force,
            mode: self.classifier.classify(&force),
            momentum: None,
            mu: None,
        })
    }
}

struct ClassifiedKf {
    kind: ObserverKind,
    inner: MomentumKf,
    classifier: ConeClassifier,
}

impl ContactObserver for ClassifiedKf {
    fn kind(&self) -> ObserverKind {
        self.kind
    }

    fn observe(&mut self, reading: &JointReading) -> Result<ObserverOutput> {
        let force = self.inner.step(reading)?;
        check_finite(self.kind, &force)?;
        let n = reading.q.len();
        Ok(ObserverOutput {
            t: reading.t,
            force,
            mode: self.classifier.classify(&force),
            momentum: Some(self.inner.state().x.rows(0, n).into_owned()),
            mu: None,
        })
    }
}

impl ContactObserver for ImmEstimator {
    fn kind(&self) -> ObserverKind {
        ObserverKind::ImmMbko
    }

    fn observe(&mut self, reading: &JointReading) -> Result<ObserverOutput> {
        let out = self.step(reading)?;
        check_finite(ObserverKind::ImmMbko, &out.f_ext_hat)?;
        Ok(ObserverOutput {
            t: out.t,
            force: out.f_ext_hat,
            mode: out.mode,
            momentum: Some(out.p_hat),
            mu: Some(out.mu),
        })
    }
}

fn check_finite(kind: ObserverKind, f: &Vector3<f64>) -> Result<()> {
    if f.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::ObserverDiverged(kind.name().into()))
    }
}
