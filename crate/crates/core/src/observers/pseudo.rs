//! Pseudo contact forces implied by the joint dynamics plus a rigid-contact
//! assumption, and the per-reading quantities every observer consumes.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Vector3};

use crate::dynamics::{jacobian_dot_from, ChainKinematics, DynamicsTerms, JointReading, LegModel};
use crate::error::{Error, Result};

/// Condition number above which the projected inertia is reported as ill-conditioned.
pub const CONDITION_WARNING: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudoWrench {
    pub force: Vector3<f64>,
    /// Condition number of `J M⁻¹ Jᵀ`.
    pub condition: f64,
}

impl PseudoWrench {
    pub fn ill_conditioned(&self) -> bool {
        !(self.condition <= CONDITION_WARNING)
    }
}

fn pinv3(m: &Matrix3<f64>) -> (Matrix3<f64>, f64) {
    let svd = m.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    let tol = max * 1e-12;
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let inv = svd.pseudo_inverse(tol).unwrap_or_else(|_| Matrix3::zeros());
    (inv, condition)
}

/// Contact force that keeps the foot stationary:
/// `f = −(J M⁻¹ Jᵀ)† (J M⁻¹ τ + J̇ q̇)`.
///
/// `tau` is the joint torque left after removing friction and the dynamics bias;
/// see [`LegSignals::constraint_torque`].
pub fn pseudo_wrench(
    mass: &DMatrix<f64>,
    jac: &Matrix3xX<f64>,
    jac_dot: &Matrix3xX<f64>,
    qd: &DVector<f64>,
    tau: &DVector<f64>,
) -> Result<PseudoWrench> {
    let chol = mass.clone().cholesky().ok_or(Error::SingularDynamics)?;
    // M⁻¹ Jᵀ and M⁻¹ τ
    let minv_jt = chol.solve(&jac.transpose());
    let minv_tau = chol.solve(tau);
    let projected: Matrix3<f64> = (jac * &minv_jt).fixed_view::<3, 3>(0, 0).into_owned();
    let (inv, condition) = pinv3(&projected);
    let drift: Vector3<f64> = jac * &minv_tau + jac_dot * qd;
    Ok(PseudoWrench {
        force: -(inv * drift),
        condition,
    })
}

/// Static approximation `f = −(Jᵀ)† τ_m`, valid when the joints are at rest.
pub fn pseudo_force_simplified(jac: &Matrix3xX<f64>, tau_m: &DVector<f64>) -> Vector3<f64> {
    let jt = DMatrix::from_fn(jac.ncols(), 3, |r, c| jac[(c, r)]);
    let pinv = jt
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .unwrap_or_else(|_| DMatrix::zeros(3, jac.ncols()));
    let f = pinv * tau_m;
    -Vector3::new(f[0], f[1], f[2])
}

/// Everything derived from one joint reading through the estimator's model `M̂`.
#[derive(Clone, Debug)]
pub struct LegSignals {
    pub t: f64,
    pub qd: DVector<f64>,
    pub tau_m: DVector<f64>,
    pub terms: DynamicsTerms,
    pub jac: Matrix3xX<f64>,
    pub jac_dot: Matrix3xX<f64>,
    /// Measured generalized momentum `M̂ q̇`.
    pub momentum: DVector<f64>,
    /// Momentum-dynamics input `τ_m − τ_f + Cᵀ q̇ − g`.
    pub input: DVector<f64>,
    pub pseudo: PseudoWrench,
    /// Static pseudo force from the motor torques alone.
    pub pseudo_simple: Vector3<f64>,
}

impl LegSignals {
    pub fn compute(model_hat: &LegModel, reading: &JointReading) -> Result<Self> {
        reading.validate(model_hat.n_dof)?;
        let terms = crate::dynamics::dynamics_terms(model_hat, &reading.q, &reading.qd)?;
        let kin = ChainKinematics::new(model_hat, &reading.q);
        let jac = kin.foot_jacobian();
        let jac_dot = jacobian_dot_from(&kin, &reading.qd);
        let qd = DVector::from_column_slice(&reading.qd);
        let tau_m = DVector::from_column_slice(&reading.tau_m);
        let momentum = &terms.mass * &qd;
        let input = &tau_m - &terms.friction + terms.coriolis.transpose() * &qd - &terms.gravity;
        let tau_c = Self::constraint_torque(&terms, &tau_m, &qd);
        let pseudo = pseudo_wrench(&terms.mass, &jac, &jac_dot, &qd, &tau_c)?;
        let pseudo_simple = pseudo_force_simplified(&jac, &tau_m);
        Ok(Self {
            t: reading.t,
            qd,
            tau_m,
            terms,
            jac,
            jac_dot,
            momentum,
            input,
            pseudo,
            pseudo_simple,
        })
    }

    /// `τ_m − τ_f − (C q̇ + g)`: motor torque minus friction and the full
    /// nonlinear bias of the equation of motion.
    pub fn constraint_torque(
        terms: &DynamicsTerms,
        tau_m: &DVector<f64>,
        qd: &DVector<f64>,
    ) -> DVector<f64> {
        tau_m - terms.bias(qd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{contact_jacobian, dynamics_terms, jacobian_dot};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Solve `[M −Gᵀ; G 0] [q̈; f] = [τ; −Ġ q̇]` by dense LU, with `Ġ q̇` folded into `drift`.
    fn kkt_force(
        mass: &DMatrix<f64>,
        constraint: &DMatrix<f64>,
        drift: &DVector<f64>,
        tau: &DVector<f64>,
    ) -> DVector<f64> {
        let n = mass.nrows();
        let m = constraint.nrows();
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(mass);
        kkt.view_mut((0, n), (n, m)).copy_from(&(-constraint.transpose()));
        kkt.view_mut((n, 0), (m, n)).copy_from(constraint);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(tau);
        rhs.rows_mut(n, m).copy_from(&(-drift));
        kkt.lu().solve(&rhs).unwrap().rows(n, m).into_owned()
    }

    fn constrained_force(
        mass: &DMatrix<f64>,
        jac: &Matrix3xX<f64>,
        jac_dot: &Matrix3xX<f64>,
        qd: &DVector<f64>,
        tau: &DVector<f64>,
    ) -> Vector3<f64> {
        let g = DMatrix::from_fn(3, jac.ncols(), |r, c| jac[(r, c)]);
        let drift = DVector::from_column_slice((jac_dot * qd).as_slice());
        let f = kkt_force(mass, &g, &drift, tau);
        Vector3::new(f[0], f[1], f[2])
    }

    #[test]
    fn vertical_prismatic_toy_supports_weight() {
        // One vertical sliding joint carrying mass m; no motor torque, gravity only.
        let m = 2.5;
        let weight = m * 9.81;
        let mass = DMatrix::from_element(1, 1, m);
        let jac = Matrix3xX::from_column_slice(&[0.0, 0.0, 1.0]);
        let jac_dot = Matrix3xX::zeros(1);
        let qd = DVector::zeros(1);
        let tau = DVector::from_element(1, -weight);
        // Only the vertical constraint row is independent here.
        let oracle = kkt_force(&mass, &DMatrix::from_element(1, 1, 1.0), &DVector::zeros(1), &tau);
        let f = pseudo_wrench(&mass, &jac, &jac_dot, &qd, &tau).unwrap();
        assert!((oracle[0] - weight).abs() < 1e-12);
        assert!((f.force.z - weight).abs() < 1e-12);
        assert!(f.force.x.abs() < 1e-12 && f.force.y.abs() < 1e-12);
    }

    #[test]
    fn recovers_force_from_matching_torque() {
        let model = LegModel::default();
        let q = [0.1, 0.6, -1.3];
        let terms = dynamics_terms(&model, &q, &[0.0; 3]).unwrap();
        let (jac, _) = contact_jacobian(&model, &q).unwrap();
        let f0 = Vector3::new(-12.0, 3.5, 40.0);
        let tau = -(jac.transpose() * f0);
        let qd = DVector::zeros(3);
        let out = pseudo_wrench(&terms.mass, &jac, &Matrix3xX::zeros(3), &qd, &tau).unwrap();
        assert!((out.force - f0).norm() < 1e-9);
        assert!(!out.ill_conditioned());

        let simple = pseudo_force_simplified(&jac, &tau);
        assert!((simple - f0).norm() < 1e-9);
        assert_eq!(pseudo_force_simplified(&jac, &DVector::zeros(3)), Vector3::zeros());
    }

    #[test]
    fn matches_constrained_dynamics_oracle() {
        let model = LegModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let q: Vec<f64> = vec![rng.gen_range(-0.4..0.4), rng.gen_range(0.2..1.2), rng.gen_range(-2.2..-0.6)];
            let qd = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
            let terms = dynamics_terms(&model, &q, qd.as_slice()).unwrap();
            let (jac, _) = contact_jacobian(&model, &q).unwrap();
            let jac_dot = jacobian_dot(&model, &q, qd.as_slice()).unwrap();
            let tau_m = DVector::from_fn(3, |_, _| rng.gen_range(-15.0..15.0));
            let tau = LegSignals::constraint_torque(&terms, &tau_m, &qd);
            let oracle = constrained_force(&terms.mass, &jac, &jac_dot, &qd, &tau);
            let out = pseudo_wrench(&terms.mass, &jac, &jac_dot, &qd, &tau).unwrap();
            assert!((out.force - oracle).norm() < 1e-8 * oracle.norm().max(1.0));

            // Residual of the contact constraint vanishes for full-rank J.
            let minv = terms.mass.clone().try_inverse().unwrap();
            let resid = &jac * &minv * (&tau + jac.transpose() * out.force) + &jac_dot * &qd;
            assert!(resid.norm() < 1e-8);
        }
    }

    #[test]
    fn singular_projection_is_flagged() {
        // Fully stretched leg: J loses rank along the leg axis.
        let model = LegModel::default();
        let q = [0.0, 0.0, 0.0];
        let terms = dynamics_terms(&model, &q, &[0.0; 3]).unwrap();
        let (jac, _) = contact_jacobian(&model, &q).unwrap();
        let out = pseudo_wrench(&terms.mass, &jac, &Matrix3xX::zeros(3), &DVector::zeros(3), &terms.gravity)
            .unwrap();
        assert!(out.ill_conditioned());
        assert!(out.force.iter().all(|v| v.is_finite()));
    }
}
