use nalgebra::{DVector, Vector3};

use super::scenario::{Gait, GroundModel, Obstacle, Reference};
use crate::control::SwingProfile;
use crate::dynamics::{dynamics_terms, ChainKinematics, LegModel};
use crate::observers::ContactMode;

/// Foot target in the hip frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefPoint {
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub acc: Vector3<f64>,
    pub cycle: i64,
    /// Progress through the current swing or stance in [0, 1).
    pub phase: f64,
    pub swing: bool,
}

/// Ground-frame swing path of cycle `cycle` between its lift-off and touchdown points.
pub fn nominal_swing(gait: &Gait, reference: &Reference, ground_z: f64, cycle: i64) -> SwingProfile {
    let half = 0.5 * reference.stance_stroke(gait);
    let [cx, cy] = reference.foot_center;
    let t_lo = gait.lift_off(cycle);
    let t_td = t_lo + gait.swing_duration();
    let start = Vector3::new(cx - half + reference.speed * t_lo, cy, ground_z);
    let end = Vector3::new(cx + half + reference.speed * t_td, cy, ground_z);
    SwingProfile::nominal(start, end, reference.step_height)
}

/// Hip-frame target from a ground-frame swing profile at time `t` of cycle `cycle`.
pub fn swing_point(profile: &SwingProfile, gait: &Gait, reference: &Reference, cycle: i64, t: f64) -> RefPoint {
    let t_sw = gait.swing_duration();
    let s = ((t - gait.lift_off(cycle)) / t_sw).clamp(0.0, 1.0);
    let p = profile.eval(s);
    let v = reference.speed;
    RefPoint {
        pos: p.pos - Vector3::new(v * t, 0.0, 0.0),
        vel: p.d1 / t_sw - Vector3::new(v, 0.0, 0.0),
        acc: p.d2 / (t_sw * t_sw),
        cycle,
        phase: s,
        swing: true,
    }
}

/// Nominal foot target: cycloidal swing between footholds, then a stance foot that
/// stays fixed on the ground (moving backwards at the walking speed in the hip frame).
pub fn reference_trajectory(gait: &Gait, reference: &Reference, ground_z: f64, t: f64) -> RefPoint {
    let (cycle, t_lo) = gait.cycle_at(t);
    let t_sw = gait.swing_duration();
    if t - t_lo < t_sw {
        let profile = nominal_swing(gait, reference, ground_z, cycle);
        return swing_point(&profile, gait, reference, cycle, t);
    }
    let half = 0.5 * reference.stance_stroke(gait);
    let [cx, cy] = reference.foot_center;
    let since = t - t_lo - t_sw;
    RefPoint {
        pos: Vector3::new(cx + half - reference.speed * since, cy, ground_z - reference.preload),
        vel: Vector3::new(-reference.speed, 0.0, 0.0),
        acc: Vector3::zeros(),
        cycle,
        phase: since / gait.stance_duration(),
        swing: false,
    }
}

/// Task-space PD with gravity compensation: `τ = Jᵀ(K_p e + K_d ė) + g(q)`.
pub fn pd_torque(
    model: &LegModel,
    q: &[f64],
    qd: &[f64],
    target_pos: &Vector3<f64>,
    target_vel: &Vector3<f64>,
    kp: f64,
    kd: f64,
) -> DVector<f64> {
    let kin = ChainKinematics::new(model, q);
    let jac = kin.foot_jacobian();
    let vel = &jac * DVector::from_column_slice(qd);
    let e = target_pos - kin.foot;
    let ed = target_vel - Vector3::new(vel[0], vel[1], vel[2]);
    let gravity = dynamics_terms(model, q, &vec![0.0; q.len()]).map(|t| t.gravity).unwrap_or_else(|_| DVector::zeros(q.len()));
    jac.transpose() * (e * kp + ed * kd) + gravity
}

/// Penalty contact force on the foot and the resulting contact mode. Position and
/// velocity are relative to the ground (obstacles are at rest in this frame).
pub fn contact_force(
    foot_pos: &Vector3<f64>,
    foot_vel: &Vector3<f64>,
    ground: &GroundModel,
    obstacles: &[Obstacle],
) -> (Vector3<f64>, ContactMode) {
    let mut force = Vector3::zeros();
    let mut mode = ContactMode::Swing;

    let pen = ground.height - foot_pos.z;
    if pen > 0.0 {
        let normal = ground.stiffness * pen - ground.damping * foot_vel.z;
        if normal > 0.0 {
            let mut tangent = Vector3::new(-foot_vel.x, -foot_vel.y, 0.0) * ground.tangential_damping;
            let limit = ground.friction * normal;
            if tangent.norm() > limit {
                tangent *= limit / tangent.norm();
            }
            force += tangent + Vector3::new(0.0, 0.0, normal);
            mode = ContactMode::Stance;
        }
    }

    for o in obstacles {
        let pen = foot_pos.x - o.position;
        if pen > 0.0 && pen <= o.depth && foot_pos.z < ground.height + o.height {
            let push = o.stiffness * pen + o.damping * foot_vel.x;
            if push > 0.0 {
                force.x -= push;
                mode = ContactMode::Collision;
            }
        }
    }
    (force, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apex_at_mid_swing() {
        let gait = Gait::default();
        let reference = Reference::default();
        let t = 0.5 * gait.swing_duration();
        let p = reference_trajectory(&gait, &reference, -0.3, t);
        assert!(p.swing);
        assert!((p.pos.z - (-0.3 + reference.step_height)).abs() < 1e-12);
    }

    #[test]
    fn stance_moves_with_ground() {
        let gait = Gait::default();
        let reference = Reference::default();
        let p = reference_trajectory(&gait, &reference, -0.3, gait.swing_duration() + 0.05);
        assert!(!p.swing);
        assert_eq!(p.vel, Vector3::new(-reference.speed, 0.0, 0.0));
    }

    #[test]
    fn reference_is_continuously_differentiable() {
        let gait = Gait::default();
        let reference = Reference::default();
        let h = 1e-7;
        let mut prev: Option<RefPoint> = None;
        for i in 0..2000 {
            let t = 0.0005 + i as f64 * 1e-3 * 0.6;
            let p = reference_trajectory(&gait, &reference, -0.3, t);
            let a = reference_trajectory(&gait, &reference, -0.3, t - h);
            let b = reference_trajectory(&gait, &reference, -0.3, t + h);
            // Skip the preload step at touchdown and lift-off.
            if a.swing == b.swing {
                let fd = (b.pos - a.pos) / (2.0 * h);
                assert!((fd - p.vel).norm() < 1e-4, "t = {t}");
            }
            if let Some(q) = prev {
                if q.swing != p.swing {
                    // Horizontal velocity is continuous across phase changes.
                    assert!((q.vel.x - p.vel.x).abs() < 0.05, "t = {t}");
                }
            }
            prev = Some(p);
        }
    }

    #[test]
    fn pd_torque_examples() {
        let model = LegModel::default();
        let q = [0.05, 0.7, -1.4];
        let qd = [0.0; 3];
        let kin = ChainKinematics::new(&model, &q);
        let g = dynamics_terms(&model, &q, &qd).unwrap().gravity;
        let at = pd_torque(&model, &q, &qd, &kin.foot, &Vector3::zeros(), 3000.0, 60.0);
        assert!((&at - &g).norm() < 1e-12);
        let off = Vector3::new(0.02, -0.01, 0.03);
        let zero_gain = pd_torque(&model, &q, &qd, &(kin.foot + off), &Vector3::zeros(), 0.0, 0.0);
        assert!((&zero_gain - &g).norm() < 1e-12);
        let kp = 1234.0;
        let stepped = pd_torque(&model, &q, &qd, &(kin.foot + off), &Vector3::zeros(), kp, 0.0);
        let expected = kin.foot_jacobian().transpose() * (off * kp);
        assert!((stepped - at - expected).norm() < 1e-9);
    }

    #[test]
    fn contact_force_examples() {
        let ground = GroundModel::default();
        let wall = Obstacle {
            position: 0.1,
            ..Obstacle::default()
        };
        let (f, m) = contact_force(&Vector3::new(0.0, 0.0, ground.height + 0.05), &Vector3::zeros(), &ground, std::slice::from_ref(&wall));
        assert_eq!((f, m), (Vector3::zeros(), ContactMode::Swing));

        let (f, m) = contact_force(&Vector3::new(0.0, 0.0, ground.height - 1e-3), &Vector3::zeros(), &ground, &[]);
        assert!((f.z - 30.0).abs() < 1e-9);
        assert_eq!(m, ContactMode::Stance);

        let (f, m) = contact_force(&Vector3::new(0.105, 0.0, ground.height + 0.03), &Vector3::new(0.3, 0.0, 0.0), &ground, std::slice::from_ref(&wall));
        assert_eq!(m, ContactMode::Collision);
        assert!(f.x < 0.0 && f.y == 0.0 && f.z == 0.0);

        // Obstacle wins over simultaneous ground contact.
        let (_, m) = contact_force(&Vector3::new(0.105, 0.0, ground.height - 1e-3), &Vector3::zeros(), &ground, &[wall]);
        assert_eq!(m, ContactMode::Collision);
    }

    #[test]
    fn friction_is_clamped_to_cone() {
        let ground = GroundModel::default();
        let (f, _) = contact_force(&Vector3::new(0.0, 0.0, ground.height - 1e-3), &Vector3::new(5.0, 0.0, 0.0), &ground, &[]);
        assert!((f.x.abs() - ground.friction * f.z).abs() < 1e-9);
        assert!(f.x < 0.0);
    }
}
