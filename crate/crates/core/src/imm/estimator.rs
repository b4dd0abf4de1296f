use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

use super::{imm_cycle, ModeBelief, ModeClassifier, ModeStep, Tpm};
use crate::dynamics::{JointReading, LegModel};
use crate::error::{Error, Result};
use crate::observers::{build_process_model, mode_measurement, ContactMode, KfState, LegSignals, ModeCones, NoiseConfig};

/// Initialization and decision parameters of the IMM estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImmSettings {
    pub tpm: Tpm,
    pub mu0: [f64; 3],
    /// Initial momentum variance (per joint).
    pub p0_momentum: f64,
    /// Initial force variance (per axis, N²).
    pub p0_force: f64,
    pub mu_floor: f64,
    pub threshold: f64,
    pub dwell: usize,
}

impl Default for ImmSettings {
    fn default() -> Self {
        Self {
            tpm: Tpm::default(),
            mu0: [1.0, 0.0, 0.0],
            p0_momentum: 0.01,
            p0_force: 100.0,
            mu_floor: 1e-6,
            threshold: 0.6,
            dwell: 2,
        }
    }
}

impl ImmSettings {
    pub fn validate(&self) -> Result<()> {
        self.tpm.validate()?;
        ModeBelief::new(self.mu0).map_err(|_| Error::config("mu0", "must be a probability vector"))?;
        if !(self.p0_momentum > 0.0) || !(self.p0_force > 0.0) {
            return Err(Error::config("p0", "initial variances must be positive"));
        }
        if !(0.0..1.0 / 3.0).contains(&self.mu_floor) {
            return Err(Error::config("mu_floor", "must lie in [0, 1/3)"));
        }
        ModeClassifier::new(self.threshold, self.dwell)?;
        Ok(())
    }

    pub fn initial_covariance(&self, n: usize) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(n + 3, n + 3);
        for i in 0..n {
            p[(i, i)] = self.p0_momentum;
        }
        for i in n..n + 3 {
            p[(i, i)] = self.p0_force;
        }
        p
    }
}

/// Filter bank, mode belief and the last combined estimate.
#[derive(Clone, Debug)]
pub struct ImmState {
    pub filters: Vec<KfState>,
    pub belief: ModeBelief,
    pub combined: KfState,
    /// Momentum input and Jacobian of the previous reading, which drive the next prediction.
    pending: Option<(DVector<f64>, Matrix3xX<f64>)>,
}

impl ImmState {
    pub fn new(n_dof: usize, settings: &ImmSettings) -> Result<Self> {
        let belief = ModeBelief::new(settings.mu0)?;
        let prior = KfState::new(DVector::zeros(n_dof + 3), settings.initial_covariance(n_dof));
        Ok(Self {
            filters: vec![prior.clone(); 3],
            belief,
            combined: prior,
            pending: None,
        })
    }
}

/// Per-tick estimator output.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateOutput {
    pub t: f64,
    pub f_ext_hat: Vector3<f64>,
    pub p_hat: DVector<f64>,
    pub mu: [f64; 3],
    pub mode: ContactMode,
    /// Normalized innovation squared of each mode filter.
    pub nis: [f64; 3],
    pub reset: [bool; 3],
}

/// One full IMM cycle for one reading. Returns the new state and the per-mode
/// normalized innovations and reset flags.
#[allow(clippy::too_many_arguments)]
pub fn imm_step(
    state: &ImmState,
    reading: &JointReading,
    model_hat: &LegModel,
    noise: &NoiseConfig,
    cones: &ModeCones,
    settings: &ImmSettings,
    dt: f64,
) -> Result<(ImmState, [f64; 3], [bool; 3])> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let sig = LegSignals::compute(model_hat, reading)?;
    let n = model_hat.n_dof;
    let c = DMatrix::identity(n + 3, n + 3);
    let steps: Vec<ModeStep> = ContactMode::ALL
        .iter()
        .map(|&mode| {
            let (process, input) = match &state.pending {
                Some((u, jac)) => (Some(build_process_model(mode, jac, noise, dt)), u.clone()),
                None => (None, DVector::zeros(n)),
            };
            let (y_f, r_f) = mode_measurement(mode, &sig.pseudo.force, cones, noise);
            let mut y = DVector::zeros(n + 3);
            y.rows_mut(0, n).copy_from(&sig.momentum);
            y.rows_mut(n, 3).copy_from(&y_f);
            let mut r = DMatrix::zeros(n + 3, n + 3);
            for i in 0..n {
                r[(i, i)] = noise.v_p;
            }
            r.view_mut((n, n), (3, 3)).copy_from(&r_f);
            ModeStep { process, input, c: c.clone(), r, y }
        })
        .collect();

    let cycle = imm_cycle(
        &state.filters,
        &state.belief.mu,
        &settings.tpm.matrix(),
        &steps,
        settings.mu_floor,
        &settings.initial_covariance(n),
    );
    let next = ImmState {
        filters: cycle.filters,
        belief: ModeBelief {
            mu: [cycle.mu[0], cycle.mu[1], cycle.mu[2]],
        },
        combined: cycle.combined,
        pending: Some((sig.input, sig.jac)),
    };
    Ok((
        next,
        [cycle.nis[0], cycle.nis[1], cycle.nis[2]],
        [cycle.reset[0], cycle.reset[1], cycle.reset[2]],
    ))
}

/// Single-leg IMM contact estimator.
#[derive(Clone, Debug)]
pub struct ImmEstimator {
    pub model_hat: LegModel,
    pub noise: NoiseConfig,
    pub cones: ModeCones,
    pub settings: ImmSettings,
    pub dt: f64,
    state: ImmState,
    classifier: ModeClassifier,
}

impl ImmEstimator {
    pub fn new(model_hat: LegModel, noise: NoiseConfig, cones: ModeCones, settings: ImmSettings, dt: f64) -> Result<Self> {
        model_hat.validate()?;
        noise.validate()?;
        cones.validate()?;
        settings.validate()?;
        if !(dt > 0.0) {
            return Err(Error::config("dt", "must be positive"));
        }
        let state = ImmState::new(model_hat.n_dof, &settings)?;
        let initial = ContactMode::from_index(state.belief.argmax().0).expect("three modes");
        let classifier = ModeClassifier::new(settings.threshold, settings.dwell)?.with_initial(initial);
        Ok(Self {
            model_hat,
            noise,
            cones,
            settings,
            dt,
            state,
            classifier,
        })
    }

    pub fn state(&self) -> &ImmState {
        &self.state
    }

    pub fn step(&mut self, reading: &JointReading) -> Result<EstimateOutput> {
        let (next, nis, reset) = imm_step(
            &self.state,
            reading,
            &self.model_hat,
            &self.noise,
            &self.cones,
            &self.settings,
            self.dt,
        )?;
        self.state = next;
        let mode = self.classifier.classify(&self.state.belief);
        let n = self.model_hat.n_dof;
        let x = &self.state.combined.x;
        Ok(EstimateOutput {
            t: reading.t,
            f_ext_hat: Vector3::new(x[n], x[n + 1], x[n + 2]),
            p_hat: x.rows(0, n).into_owned(),
            mu: self.state.belief.mu,
            mode,
            nis,
            reset,
        })
    }
}
