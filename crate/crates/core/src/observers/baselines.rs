//! Single-filter comparison observers and the cone rule that turns their force
//! estimates into contact modes.

use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};

use super::kf::{kf_predict, kf_update, KfState};
use super::models::{build_process_model, ContactMode, ModeCones, NoiseConfig};
use super::pseudo::{pseudo_force_simplified, LegSignals};
use crate::dynamics::{JointReading, LegModel};
use crate::error::{Error, Result};

/// Momentum residual observer `r = K_O (p − p₀ − ∫(u + r) dt)`.
#[derive(Clone, Debug)]
pub struct FoMbo {
    pub model_hat: LegModel,
    pub gain: f64,
    pub dt: f64,
    residual: DVector<f64>,
    integral: DVector<f64>,
    p0: Option<DVector<f64>>,
    pending: Option<DVector<f64>>,
}

impl FoMbo {
    pub fn new(model_hat: LegModel, gain: f64, dt: f64) -> Result<Self> {
        if !(gain > 0.0) {
            return Err(Error::config("fo_mbo_gain", "must be positive"));
        }
        let n = model_hat.n_dof;
        Ok(Self {
            model_hat,
            gain,
            dt,
            residual: DVector::zeros(n),
            integral: DVector::zeros(n),
            p0: None,
            pending: None,
        })
    }

    /// Current residual, an estimate of the external joint torque.
    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    /// Advances the residual and returns the foot force `(Jᵀ)† r`.
    pub fn step(&mut self, reading: &JointReading) -> Result<Vector3<f64>> {
        let sig = LegSignals::compute(&self.model_hat, reading)?;
        match (&self.p0, &self.pending) {
            (Some(p0), Some(u)) => {
                self.integral += (u + &self.residual) * self.dt;
                self.residual = (&sig.momentum - p0 - &self.integral) * self.gain;
            }
            _ => self.p0 = Some(sig.momentum.clone()),
        }
        self.pending = Some(sig.input);
        Ok(pseudo_force_simplified(&sig.jac, &(-&self.residual)))
    }
}

/// Kalman observer on the stance-mode model. With `force_variance = None` only the
/// momentum is measured; otherwise the static pseudo force is measured as well.
#[derive(Clone, Debug)]
pub struct MomentumKf {
    pub model_hat: LegModel,
    pub noise: NoiseConfig,
    pub force_variance: Option<f64>,
    pub dt: f64,
    state: KfState,
    pending: Option<(DVector<f64>, Matrix3xX<f64>)>,
}

impl MomentumKf {
    pub fn new(model_hat: LegModel, noise: NoiseConfig, force_variance: Option<f64>, p0: DMatrix<f64>, dt: f64) -> Result<Self> {
        if let Some(v) = force_variance {
            if !(v > 0.0) {
                return Err(Error::config("pm_force_variance", "must be positive"));
            }
        }
        let dim = model_hat.n_dof + 3;
        if p0.shape() != (dim, dim) {
            return Err(Error::config("p0", "dimension does not match the leg"));
        }
        Ok(Self {
            model_hat,
            noise,
            force_variance,
            dt,
            state: KfState::new(DVector::zeros(dim), p0),
            pending: None,
        })
    }

    pub fn state(&self) -> &KfState {
        &self.state
    }

    pub fn step(&mut self, reading: &JointReading) -> Result<Vector3<f64>> {
        let sig = LegSignals::compute(&self.model_hat, reading)?;
        let n = self.model_hat.n_dof;
        let prior = match &self.pending {
            Some((u, jac)) => {
                let model = build_process_model(ContactMode::Stance, jac, &self.noise, self.dt);
                kf_predict(&self.state, &model, u)
            }
            None => self.state.clone(),
        };
        let update = match self.force_variance {
            None => {
                let c = DMatrix::identity(n, n + 3);
                let r = DMatrix::identity(n, n) * self.noise.v_p;
                kf_update(&prior, &c, &r, &sig.momentum)?
            }
            Some(var) => {
                let c = DMatrix::identity(n + 3, n + 3);
                let mut r = DMatrix::identity(n + 3, n + 3) * self.noise.v_p;
                for i in n..n + 3 {
                    r[(i, i)] = var;
                }
                let mut y = DVector::zeros(n + 3);
                y.rows_mut(0, n).copy_from(&sig.momentum);
                y.rows_mut(n, 3).copy_from(&sig.pseudo_simple);
                kf_update(&prior, &c, &r, &y)?
            }
        };
        if !update.state.is_finite() {
            return Err(Error::ObserverDiverged(self.name().into()));
        }
        self.state = update.state;
        self.pending = Some((sig.input, sig.jac));
        Ok(self.force())
    }

    pub fn force(&self) -> Vector3<f64> {
        let n = self.model_hat.n_dof;
        Vector3::new(self.state.x[n], self.state.x[n + 1], self.state.x[n + 2])
    }

    fn name(&self) -> &'static str {
        if self.force_variance.is_some() {
            "pm-mbko"
        } else {
            "mbko"
        }
    }
}

/// Contact mode from a force estimate: collision if the force lies in the collision
/// cone, stance if it lies in the stance cone, otherwise swing. A change is accepted
/// after `dwell` consecutive agreeing ticks.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeClassifier {
    pub cones: ModeCones,
    pub dwell: usize,
    state: (ContactMode, Option<(ContactMode, usize)>),
}

impl ConeClassifier {
    pub fn new(cones: ModeCones, dwell: usize) -> Self {
        Self {
            cones,
            dwell: dwell.max(1),
            state: (ContactMode::Swing, None),
        }
    }

    pub fn raw_mode(&self, f: &Vector3<f64>) -> ContactMode {
        if self.cones.collision.contains(f) {
            ContactMode::Collision
        } else if self.cones.stance.contains(f) {
            ContactMode::Stance
        } else {
            ContactMode::Swing
        }
    }

    pub fn classify(&mut self, f: &Vector3<f64>) -> ContactMode {
        let raw = self.raw_mode(f);
        let (current, candidate) = &mut self.state;
        if raw == *current {
            *candidate = None;
            return *current;
        }
        let count = match candidate {
            Some((m, n)) if *m == raw => *n + 1,
            _ => 1,
        };
        if count >= self.dwell {
            *current = raw;
            *candidate = None;
        } else {
            *candidate = Some((raw, count));
        }
        *current
    }
}
