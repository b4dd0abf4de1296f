use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Matrix6, Vector3, Vector6};

use super::model::LegModel;
use super::spatial::{body_inertia, crf, crm, revolute_subspace};
use crate::error::{ensure_finite, Error, Result};

/// Velocity scale of the tanh smoothing applied to Coulomb friction (rad/s).
pub const COULOMB_SMOOTHING: f64 = 0.01;

/// Terms of `M(q) q̈ + C(q, q̇) q̇ + g(q) + τ_f = τ_m + τ_ext`.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsTerms {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
    pub friction: DVector<f64>,
}

impl DynamicsTerms {
    /// `C q̇ + g + τ_f`, the velocity- and configuration-dependent torque.
    pub fn bias(&self, qd: &DVector<f64>) -> DVector<f64> {
        &self.coriolis * qd + &self.gravity + &self.friction
    }
}

/// World-frame joint axes, joint origins, link frames and COMs at a configuration.
#[derive(Clone, Debug)]
pub struct ChainKinematics {
    pub axes: Vec<Vector3<f64>>,
    pub origins: Vec<Vector3<f64>>,
    pub rotations: Vec<Matrix3<f64>>,
    pub coms: Vec<Vector3<f64>>,
    pub foot: Vector3<f64>,
}

impl ChainKinematics {
    pub fn new(model: &LegModel, q: &[f64]) -> Self {
        let n = model.n_dof;
        let mut axes = Vec::with_capacity(n);
        let mut origins = Vec::with_capacity(n);
        let mut rotations = Vec::with_capacity(n);
        let mut coms = Vec::with_capacity(n);

        let mut parent_rot = model.base_transform.rotation();
        let mut origin = model.base_transform.translation();
        for i in 0..n {
            if i > 0 {
                origin += rotations[i - 1] * model.link_vector(i - 1);
                parent_rot = rotations[i - 1];
            }
            let axis = parent_rot * model.axis(i).into_inner();
            let rot = parent_rot * model.joint_rotation(i, q[i]);
            axes.push(axis);
            origins.push(origin);
            coms.push(origin + rot * model.com_offset(i));
            rotations.push(rot);
        }
        let foot = origins[n - 1] + rotations[n - 1] * model.link_vector(n - 1);
        Self {
            axes,
            origins,
            rotations,
            coms,
            foot,
        }
    }

    pub(crate) fn subspaces(&self) -> Vec<Vector6<f64>> {
        self.axes
            .iter()
            .zip(&self.origins)
            .map(|(a, o)| revolute_subspace(a, o))
            .collect()
    }

    pub(crate) fn body_inertias(&self, model: &LegModel) -> Vec<Matrix6<f64>> {
        (0..model.n_dof)
            .map(|i| {
                let rot = self.rotations[i];
                let world_inertia = rot * model.inertia(i) * rot.transpose();
                body_inertia(model.link_masses[i], &self.coms[i], &world_inertia)
            })
            .collect()
    }

    /// Linear foot Jacobian: column `i` is `a_i × (p_foot − o_i)`.
    pub fn foot_jacobian(&self) -> Matrix3xX<f64> {
        let n = self.axes.len();
        Matrix3xX::from_fn(n, |r, c| {
            self.axes[c].cross(&(self.foot - self.origins[c]))[r]
        })
    }
}

fn composite_inertias(bodies: &[Matrix6<f64>]) -> Vec<Matrix6<f64>> {
    let mut out = bodies.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        let next = out[i + 1];
        out[i] += next;
    }
    out
}

fn check_state(model: &LegModel, q: &[f64], qd: &[f64]) -> Result<()> {
    if q.len() != model.n_dof || qd.len() != model.n_dof {
        return Err(Error::InvalidArgument(format!(
            "state dimension mismatch: q {} / qd {} for n_dof {}",
            q.len(),
            qd.len(),
            model.n_dof
        )));
    }
    ensure_finite("q", q)?;
    ensure_finite("qd", qd)
}

/// Joint-space inertia by the composite-rigid-body algorithm.
pub fn mass_matrix(model: &LegModel, q: &[f64]) -> DMatrix<f64> {
    let kin = ChainKinematics::new(model, q);
    mass_matrix_from(&kin.subspaces(), &composite_inertias(&kin.body_inertias(model)))
}

fn mass_matrix_from(s: &[Vector6<f64>], ic: &[Matrix6<f64>]) -> DMatrix<f64> {
    let n = s.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let force = ic[j] * s[j];
        for i in 0..=j {
            let v = s[i].dot(&force);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `∂M/∂q_k` for every k, from closed-form derivatives of the CRBA expression.
fn mass_matrix_partials(s: &[Vector6<f64>], ic: &[Matrix6<f64>]) -> Vec<DMatrix<f64>> {
    let n = s.len();
    let mut out = vec![DMatrix::zeros(n, n); n];
    for (k, dm) in out.iter_mut().enumerate() {
        let sk_f = crf(&s[k]);
        let sk_m = crm(&s[k]);
        for j in 0..n {
            for i in 0..=j {
                let v = if k <= i {
                    0.0
                } else if k <= j {
                    s[i].dot(&(sk_f * ic[j] * s[j]))
                } else {
                    s[i].dot(&((sk_f * ic[k] - ic[k] * sk_m) * s[j]))
                };
                dm[(i, j)] = v;
                dm[(j, i)] = v;
            }
        }
    }
    out
}

/// Coriolis/centrifugal matrix from Christoffel symbols of the first kind, so that
/// `Ṁ = C + Cᵀ` holds exactly.
fn christoffel_coriolis(partials: &[DMatrix<f64>], qd: &[f64]) -> DMatrix<f64> {
    let n = qd.len();
    DMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| 0.5 * (partials[k][(i, j)] + partials[j][(i, k)] - partials[i][(j, k)]) * qd[k])
            .sum()
    })
}

fn gravity_from(model: &LegModel, kin: &ChainKinematics, s: &[Vector6<f64>]) -> DVector<f64> {
    let n = model.n_dof;
    let g = Vector3::from(model.gravity);
    let mut wrench = Vector6::zeros();
    let mut out = DVector::zeros(n);
    for i in (0..n).rev() {
        let f = model.link_masses[i] * g;
        let moment = kin.coms[i].cross(&f);
        wrench += Vector6::new(moment.x, moment.y, moment.z, f.x, f.y, f.z);
        out[i] = -s[i].dot(&wrench);
    }
    out
}

pub fn friction_torque(model: &LegModel, qd: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        qd.len(),
        qd.iter().enumerate().map(|(i, &v)| {
            model.viscous_friction[i] * v
                + model.coulomb_friction[i] * (v / COULOMB_SMOOTHING).tanh()
        }),
    )
}

/// All terms of the joint-space equation of motion at `(q, q̇)`.
pub fn dynamics_terms(model: &LegModel, q: &[f64], qd: &[f64]) -> Result<DynamicsTerms> {
    check_state(model, q, qd)?;
    let kin = ChainKinematics::new(model, q);
    let s = kin.subspaces();
    let ic = composite_inertias(&kin.body_inertias(model));
    let mass = mass_matrix_from(&s, &ic);
    let coriolis = christoffel_coriolis(&mass_matrix_partials(&s, &ic), qd);
    Ok(DynamicsTerms {
        mass,
        coriolis,
        gravity: gravity_from(model, &kin, &s),
        friction: friction_torque(model, qd),
    })
}

/// Linear foot Jacobian (3 × n) and foot position, both in world coordinates.
pub fn contact_jacobian(model: &LegModel, q: &[f64]) -> Result<(Matrix3xX<f64>, Vector3<f64>)> {
    if q.len() != model.n_dof {
        return Err(Error::InvalidArgument(format!(
            "q has {} entries, expected {}",
            q.len(),
            model.n_dof
        )));
    }
    ensure_finite("q", q)?;
    let kin = ChainKinematics::new(model, q);
    Ok((kin.foot_jacobian(), kin.foot))
}

/// Time derivative of the foot Jacobian along `(q, q̇)`.
pub fn jacobian_dot(model: &LegModel, q: &[f64], qd: &[f64]) -> Result<Matrix3xX<f64>> {
    check_state(model, q, qd)?;
    let kin = ChainKinematics::new(model, q);
    Ok(jacobian_dot_from(&kin, qd))
}

pub(crate) fn jacobian_dot_from(kin: &ChainKinematics, qd: &[f64]) -> Matrix3xX<f64> {
    let n = qd.len();
    let jac = kin.foot_jacobian();
    let foot_vel = &jac * DVector::from_column_slice(qd);
    let mut out = Matrix3xX::zeros(n);
    let mut omega = Vector3::zeros();
    for i in 0..n {
        // `omega` is the angular velocity of the parent of joint i here.
        let axis_dot = omega.cross(&kin.axes[i]);
        let origin_vel: Vector3<f64> = (0..i)
            .map(|k| kin.axes[k].cross(&(kin.origins[i] - kin.origins[k])) * qd[k])
            .sum();
        let col = axis_dot.cross(&(kin.foot - kin.origins[i]))
            + kin.axes[i].cross(&(foot_vel - origin_vel));
        out.set_column(i, &col);
        omega += kin.axes[i] * qd[i];
    }
    out
}

/// Joint accelerations from `M q̈ = τ_m + Jᵀ f_ext − C q̇ − g − τ_f`.
pub fn forward_dynamics(
    model: &LegModel,
    q: &[f64],
    qd: &[f64],
    tau_m: &[f64],
    f_ext: &Vector3<f64>,
) -> Result<DVector<f64>> {
    if tau_m.len() != model.n_dof {
        return Err(Error::InvalidArgument("tau_m dimension mismatch".into()));
    }
    ensure_finite("tau_m", tau_m)?;
    ensure_finite("f_ext", f_ext.as_slice())?;
    let terms = dynamics_terms(model, q, qd)?;
    let (jac, _) = contact_jacobian(model, q)?;
    let qd_v = DVector::from_column_slice(qd);
    let rhs = DVector::from_column_slice(tau_m) + jac.transpose() * f_ext - terms.bias(&qd_v);
    solve_spd(terms.mass, &rhs)
}

pub(crate) fn solve_spd(mass: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = mass.cholesky().ok_or(Error::SingularDynamics)?;
    let sol = chol.solve(rhs);
    if sol.iter().all(|v| v.is_finite()) {
        Ok(sol)
    } else {
        Err(Error::SingularDynamics)
    }
}

/// Generalized momentum `p = M(q) q̇`.
pub fn generalized_momentum(model: &LegModel, q: &[f64], qd: &[f64]) -> Result<DVector<f64>> {
    check_state(model, q, qd)?;
    Ok(mass_matrix(model, q) * DVector::from_column_slice(qd))
}

/// Recursive Newton–Euler inverse dynamics (world-frame spatial form), without friction.
///
/// Returns `M q̈ + C q̇ + g`. Used as an independent route for the CRBA/Christoffel terms.
pub fn inverse_dynamics(model: &LegModel, q: &[f64], qd: &[f64], qdd: &[f64]) -> DVector<f64> {
    let n = model.n_dof;
    let kin = ChainKinematics::new(model, q);
    let s = kin.subspaces();
    let bodies = kin.body_inertias(model);
    let g = Vector3::from(model.gravity);

    let mut vel = Vector6::zeros();
    let mut acc = Vector6::new(0.0, 0.0, 0.0, -g.x, -g.y, -g.z);
    let mut forces = Vec::with_capacity(n);
    for i in 0..n {
        vel += s[i] * qd[i];
        acc += s[i] * qdd[i] + crm(&vel) * s[i] * qd[i];
        forces.push(bodies[i] * acc + crf(&vel) * bodies[i] * vel);
    }
    let mut out = DVector::zeros(n);
    let mut total = Vector6::zeros();
    for i in (0..n).rev() {
        total += forces[i];
        out[i] = s[i].dot(&total);
    }
    out
}

/// Kinetic plus gravitational potential energy.
pub fn mechanical_energy(model: &LegModel, q: &[f64], qd: &[f64]) -> f64 {
    let qd_v = DVector::from_column_slice(qd);
    let kinetic = 0.5 * qd_v.dot(&(mass_matrix(model, q) * &qd_v));
    let kin = ChainKinematics::new(model, q);
    let g = Vector3::from(model.gravity);
    let potential: f64 = (0..model.n_dof)
        .map(|i| -model.link_masses[i] * g.dot(&kin.coms[i]))
        .sum();
    kinetic + potential
}

/// Damped least-squares inverse kinematics for the foot point.
pub fn inverse_kinematics(
    model: &LegModel,
    target: &Vector3<f64>,
    initial: &[f64],
) -> Result<Vec<f64>> {
    let mut q = initial.to_vec();
    for _ in 0..200 {
        let kin = ChainKinematics::new(model, &q);
        let err = target - kin.foot;
        if err.norm() < 1e-12 {
            return Ok(q);
        }
        let jac = kin.foot_jacobian();
        let jjt = &jac * jac.transpose() + Matrix3::identity() * 1e-8;
        let inv = jjt
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular leg configuration".into()))?;
        let step = jac.transpose() * inv * err;
        for (qi, di) in q.iter_mut().zip(step.iter()) {
            *qi += di;
        }
    }
    let kin = ChainKinematics::new(model, &q);
    if (target - kin.foot).norm() < 1e-8 {
        Ok(q)
    } else {
        Err(Error::InvalidArgument(format!(
            "foot target {:?} is out of reach",
            target.as_slice()
        )))
    }
}
