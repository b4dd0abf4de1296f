//! Fixed-hip leg walking on a treadmill-like ground with penalty contacts, scripted
//! obstacles and noisy joint sensors. Produces ground truth for the estimators.

mod scenario;
mod trace;
mod trajectory;

pub use scenario::{
    ControllerConfig, ControllerKind, DetectionSource, Gait, GroundModel, InitialState, ModelMismatch, Obstacle,
    Reference, Scenario, SensorNoise,
};
pub use trace::{config_hash, ScenarioTrace, TraceMetadata, TraceRecord, SCHEMA_VERSION};
pub use trajectory::{contact_force, nominal_swing, pd_torque, reference_trajectory, swing_point, RefPoint};

use nalgebra::{DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::control::{admittance_accel, osc_accel, reflex_adjust};
use crate::dynamics::{forward_dynamics, inverse_kinematics, ChainKinematics, JointReading, LegModel};
use crate::error::{Error, Result};
use crate::imm::ImmEstimator;
use crate::observer::EstimatorConfig;
use crate::observers::ContactMode;

/// Joint speed beyond which the integration is declared diverged (rad/s).
pub const DIVERGENCE_SPEED: f64 = 1e3;

impl Scenario {
    /// The estimator's view of `model` under this scenario's mismatch.
    pub fn estimator_model(&self, model: &LegModel) -> LegModel {
        model.with_mass_scale(self.model_mismatch.mass_scale)
    }
}

fn initial_state(scenario: &Scenario, model: &LegModel) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(init) = &scenario.initial {
        if init.q.len() != model.n_dof || init.qd.len() != model.n_dof {
            return Err(Error::config("initial", "state dimension does not match the leg"));
        }
        return Ok((init.q.clone(), init.qd.clone()));
    }
    let r0 = reference_trajectory(&scenario.gait, &scenario.reference, scenario.ground.height, 0.0);
    let mut guess = vec![0.0; model.n_dof];
    if model.n_dof >= 3 {
        guess[1] = 0.7;
        guess[2] = -1.4;
    }
    let q = inverse_kinematics(model, &r0.pos, &guess)?;
    let jac = ChainKinematics::new(model, &q).foot_jacobian();
    let qd = if model.n_dof == 3 {
        let square = Matrix3::from_fn(|r, c| jac[(r, c)]);
        square.lu().solve(&r0.vel).map(|v| v.as_slice().to_vec()).unwrap_or_else(|| vec![0.0; 3])
    } else {
        vec![0.0; model.n_dof]
    };
    Ok((q, qd))
}

struct SwingState {
    cycle: i64,
    profile: crate::control::SwingProfile,
    reflexed: bool,
    first_hit: Option<f64>,
    rc: Vector3<f64>,
    rcd: Vector3<f64>,
}

/// Simulates `scenario` on the true leg `model`. An in-loop estimator, when the
/// controller needs one, uses the default estimator configuration.
pub fn simulate(scenario: &Scenario, model: &LegModel) -> Result<ScenarioTrace> {
    simulate_with(scenario, model, &EstimatorConfig::default())
}

pub fn simulate_with(scenario: &Scenario, model: &LegModel, est_cfg: &EstimatorConfig) -> Result<ScenarioTrace> {
    scenario.validate()?;
    model.validate()?;
    let n = model.n_dof;
    let dt = scenario.dt;
    let gait = &scenario.gait;
    let reference = &scenario.reference;
    let ground = &scenario.ground;
    let ctl = &scenario.controller;
    let speed = Vector3::new(reference.speed, 0.0, 0.0);
    let t_sw = gait.swing_duration();
    let osc_gains = ctl.admittance.osc_gains();

    let needs_estimator = ctl.kind == ControllerKind::Ac || ctl.detection == DetectionSource::Estimator;
    let mut estimator = if needs_estimator {
        let cfg = EstimatorConfig { dt, ..est_cfg.clone() };
        Some(ImmEstimator::new(scenario.estimator_model(model), cfg.noise, cfg.cones, cfg.imm, dt)?)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = &scenario.sensor_noise;
    let mut perturb = |v: &[f64], std: f64| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x + std * e
            })
            .collect()
    };

    let (mut q, mut qd) = initial_state(scenario, model)?;
    let r0 = reference_trajectory(gait, reference, ground.height, 0.0);
    let mut sw = SwingState {
        cycle: r0.cycle,
        profile: nominal_swing(gait, reference, ground.height, r0.cycle),
        reflexed: false,
        first_hit: None,
        rc: r0.pos,
        rcd: r0.vel,
    };

    let ticks = scenario.ticks();
    let mut records = Vec::with_capacity(ticks);
    let mut last_estimate: Option<(ContactMode, Vector3<f64>)> = None;
    for k in 0..ticks {
        let t = k as f64 * dt;
        let kin = ChainKinematics::new(model, &q);
        let jac = kin.foot_jacobian();
        let foot = kin.foot;
        let v = &jac * DVector::from_column_slice(&qd);
        let foot_vel = Vector3::new(v[0], v[1], v[2]);
        let foot_ground = foot + speed * t;
        let (f_ext, mode) = contact_force(&foot_ground, &(foot_vel + speed), ground, &scenario.obstacles);

        let (cycle, t_lo) = gait.cycle_at(t);
        let swing = t - t_lo < t_sw;
        if cycle != sw.cycle {
            sw.cycle = cycle;
            sw.profile = nominal_swing(gait, reference, ground.height, cycle);
            sw.reflexed = false;
            sw.first_hit = None;
        }

        let (rd, acc_cmd) = if swing {
            let phase = (t - t_lo) / t_sw;
            let detected = match ctl.detection {
                DetectionSource::Truth => {
                    if mode == ContactMode::Collision && sw.first_hit.is_none() {
                        sw.first_hit = Some(t);
                    }
                    sw.first_hit.is_some_and(|hit| t >= hit + ctl.detection_delay - 1e-9)
                }
                DetectionSource::Estimator => matches!(last_estimate, Some((ContactMode::Collision, _))),
            };
            if detected && !sw.reflexed {
                sw.reflexed = true;
                sw.profile = reflex_adjust(phase, &foot_ground, &sw.profile, &ctl.reflex);
            }
            let rd = swing_point(&sw.profile, gait, reference, cycle, t);
            let f_hat = match last_estimate {
                Some((ContactMode::Collision, f)) => f,
                _ => Vector3::zeros(),
            };
            let mut acc = rd.acc;
            for a in 0..2 {
                acc[a] = match ctl.kind {
                    ControllerKind::Ac => admittance_accel(f_hat[a], sw.rc[a], rd.pos[a], sw.rcd[a], rd.vel[a], rd.acc[a], &ctl.admittance),
                    ControllerKind::Osc => osc_accel(sw.rc[a], rd.pos[a], sw.rcd[a], rd.vel[a], rd.acc[a], &osc_gains),
                };
            }
            sw.rc.z = rd.pos.z;
            sw.rcd.z = rd.vel.z;
            (rd, acc)
        } else {
            let rd = reference_trajectory(gait, reference, ground.height, t);
            sw.rc = rd.pos;
            sw.rcd = rd.vel;
            (rd, Vector3::zeros())
        };

        let tau = pd_torque(model, &q, &qd, &sw.rc, &sw.rcd, ctl.kp, ctl.kd);
        let tau_m = tau.as_slice().to_vec();
        let reading = JointReading {
            t,
            q: perturb(&q, noise.q),
            qd: perturb(&qd, noise.qd),
            tau_m: perturb(&tau_m, noise.tau_m),
        };
        if let Some(est) = estimator.as_mut() {
            let out = est.step(&reading)?;
            last_estimate = Some((out.mode, out.f_ext_hat));
        }

        let qdd = forward_dynamics(model, &q, &qd, &tau_m, &f_ext)?;
        records.push(TraceRecord {
            t,
            q: q.clone(),
            qd: qd.clone(),
            qdd: qdd.as_slice().to_vec(),
            tau_m,
            f_ext,
            mode,
            foot_pos: foot,
            foot_vel,
            ref_pos: rd.pos,
            ref_vel: rd.vel,
            acc_cmd,
            swing,
            reading,
        });

        if swing {
            for a in 0..2 {
                sw.rcd[a] += acc_cmd[a] * dt;
                sw.rc[a] += sw.rcd[a] * dt;
            }
        }
        let h = dt / scenario.substeps as f64;
        for sub in 0..scenario.substeps {
            let acc = if sub == 0 {
                qdd.clone()
            } else {
                let ts = t + sub as f64 * h;
                let kin = ChainKinematics::new(model, &q);
                let v = kin.foot_jacobian() * DVector::from_column_slice(&qd);
                let vel = Vector3::new(v[0], v[1], v[2]);
                let (f, _) = contact_force(&(kin.foot + speed * ts), &(vel + speed), ground, &scenario.obstacles);
                forward_dynamics(model, &q, &qd, &records[k].tau_m, &f)?
            };
            for i in 0..n {
                qd[i] += acc[i] * h;
                q[i] += qd[i] * h;
            }
        }
        let fastest = qd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(fastest <= DIVERGENCE_SPEED) || q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { tick: k, time: t, speed: fastest });
        }
    }
    Ok(ScenarioTrace { n_dof: n, dt, records })
}
