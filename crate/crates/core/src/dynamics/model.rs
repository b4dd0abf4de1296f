use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pose of the first joint frame (hip) in the world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseTransform {
    /// Hip origin in world coordinates (m).
    pub translation: [f64; 3],
    /// Row-major rotation matrix from hip frame to world frame.
    pub rotation: [[f64; 3]; 3],
}

impl Default for BaseTransform {
    fn default() -> Self {
        Self {
            translation: [0.0; 3],
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }
}

impl BaseTransform {
    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.translation)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        mat3(&self.rotation)
    }
}

/// Kinematic and inertial parameters of a serial leg with revolute joints.
///
/// Joint `i` rotates about `joint_axes[i]`, expressed in the frame of link `i - 1`
/// (the base frame for `i = 0`). Link `i` extends `link_lengths[i]` along
/// `link_directions[i]` in its own frame; the end of the last link is the foot point.
/// Units: m, kg, kg·m², N·m·s/rad, N·m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegModel {
    pub n_dof: usize,
    pub link_lengths: Vec<f64>,
    pub link_directions: Vec<[f64; 3]>,
    pub link_masses: Vec<f64>,
    pub link_com_offsets: Vec<[f64; 3]>,
    /// Rotational inertia about the link COM, link frame, row-major.
    pub link_inertias: Vec<[[f64; 3]; 3]>,
    pub joint_axes: Vec<[f64; 3]>,
    #[serde(default)]
    pub base_transform: BaseTransform,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub viscous_friction: Vec<f64>,
    #[serde(default)]
    pub coulomb_friction: Vec<f64>,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

fn mat3(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::new(
        rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
        rows[2][1], rows[2][2],
    )
}

fn diag_inertia(ixx: f64, iyy: f64, izz: f64) -> [[f64; 3]; 3] {
    [[ixx, 0.0, 0.0], [0.0, iyy, 0.0], [0.0, 0.0, izz]]
}

impl Default for LegModel {
    /// Left-front leg of a small quadruped: hip roll (x), hip pitch (y), knee pitch (y).
    fn default() -> Self {
        Self {
            n_dof: 3,
            link_lengths: vec![0.08, 0.21, 0.21],
            link_directions: vec![[0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [0.0, 0.0, -1.0]],
            link_masses: vec![0.6, 1.0, 0.2],
            link_com_offsets: vec![[0.0, 0.04, 0.0], [0.0, 0.0, -0.05], [0.0, 0.0, -0.1]],
            link_inertias: vec![
                diag_inertia(4.0e-4, 3.0e-4, 4.0e-4),
                diag_inertia(3.7e-3, 3.7e-3, 3.0e-4),
                diag_inertia(7.4e-4, 7.4e-4, 2.0e-5),
            ],
            joint_axes: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            base_transform: BaseTransform::default(),
            gravity: default_gravity(),
            viscous_friction: vec![0.0; 3],
            coulomb_friction: vec![0.0; 3],
        }
    }
}

impl LegModel {
    /// A single point mass `mass` at distance `length` along +x, rotating about `axis`.
    pub fn point_pendulum(mass: f64, length: f64, axis: [f64; 3]) -> Self {
        Self {
            n_dof: 1,
            link_lengths: vec![length],
            link_directions: vec![[1.0, 0.0, 0.0]],
            link_masses: vec![mass],
            link_com_offsets: vec![[length, 0.0, 0.0]],
            link_inertias: vec![[[0.0; 3]; 3]],
            joint_axes: vec![axis],
            base_transform: BaseTransform::default(),
            gravity: default_gravity(),
            viscous_friction: vec![0.0],
            coulomb_friction: vec![0.0],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LegModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_dof;
        if n == 0 {
            return Err(Error::InvalidModel("n_dof must be at least 1".into()));
        }
        let lengths = [
            ("link_lengths", self.link_lengths.len()),
            ("link_directions", self.link_directions.len()),
            ("link_masses", self.link_masses.len()),
            ("link_com_offsets", self.link_com_offsets.len()),
            ("link_inertias", self.link_inertias.len()),
            ("joint_axes", self.joint_axes.len()),
            ("viscous_friction", self.viscous_friction.len()),
            ("coulomb_friction", self.coulomb_friction.len()),
        ];
        for (name, len) in lengths {
            if len != n {
                return Err(Error::InvalidModel(format!(
                    "{name} has {len} entries, expected n_dof = {n}"
                )));
            }
        }
        for (i, &m) in self.link_masses.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidModel(format!("link_masses[{i}] must be > 0")));
            }
        }
        for (i, axis) in self.joint_axes.iter().enumerate() {
            let norm = Vector3::from(*axis).norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "joint_axes[{i}] has norm {norm}, expected unit length"
                )));
            }
        }
        for (i, dir) in self.link_directions.iter().enumerate() {
            let norm = Vector3::from(*dir).norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "link_directions[{i}] has norm {norm}, expected unit length"
                )));
            }
        }
        for (i, inertia) in self.link_inertias.iter().enumerate() {
            let m = mat3(inertia);
            if (m - m.transpose()).abs().max() > 1e-12 {
                return Err(Error::InvalidModel(format!("link_inertias[{i}] is not symmetric")));
            }
            let min_eig = m.symmetric_eigenvalues().min();
            if min_eig < -1e-12 {
                return Err(Error::InvalidModel(format!(
                    "link_inertias[{i}] is not positive semidefinite (min eigenvalue {min_eig})"
                )));
            }
        }
        let rot = self.base_transform.rotation();
        if (rot.transpose() * rot - Matrix3::identity()).abs().max() > 1e-9 {
            return Err(Error::InvalidModel("base_transform.rotation is not orthonormal".into()));
        }
        let all = self
            .link_lengths
            .iter()
            .chain(&self.viscous_friction)
            .chain(&self.coulomb_friction)
            .chain(&self.gravity)
            .chain(&self.base_transform.translation);
        if !all.clone().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Copy with every link mass and rotational inertia scaled by `factor`.
    pub fn with_mass_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.link_masses {
            *m *= factor;
        }
        for inertia in &mut out.link_inertias {
            for row in inertia.iter_mut() {
                for v in row.iter_mut() {
                    *v *= factor;
                }
            }
        }
        out
    }

    pub(crate) fn axis(&self, i: usize) -> Unit<Vector3<f64>> {
        Unit::new_unchecked(Vector3::from(self.joint_axes[i]))
    }

    pub(crate) fn link_vector(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.link_directions[i]) * self.link_lengths[i]
    }

    pub(crate) fn com_offset(&self, i: usize) -> Vector3<f64> {
        Vector3::from(self.link_com_offsets[i])
    }

    pub(crate) fn inertia(&self, i: usize) -> Matrix3<f64> {
        mat3(&self.link_inertias[i])
    }

    pub(crate) fn joint_rotation(&self, i: usize, angle: f64) -> Matrix3<f64> {
        Rotation3::from_axis_angle(&self.axis(i), angle).into_inner()
    }
}

/// One sample of proprioceptive joint data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointReading {
    pub t: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub tau_m: Vec<f64>,
}

impl JointReading {
    pub fn validate(&self, n_dof: usize) -> Result<()> {
        if self.q.len() != n_dof || self.qd.len() != n_dof || self.tau_m.len() != n_dof {
            return Err(Error::InvalidArgument(format!(
                "reading at t = {} has wrong dimension (expected {n_dof})",
                self.t
            )));
        }
        crate::error::ensure_finite("reading", &[self.t])?;
        crate::error::ensure_finite("q", &self.q)?;
        crate::error::ensure_finite("qd", &self.qd)?;
        crate::error::ensure_finite("tau_m", &self.tau_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_valid() {
        LegModel::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut m = LegModel::default();
        m.link_masses[1] = 0.0;
        assert!(m.validate().is_err());

        let mut m = LegModel::default();
        m.joint_axes[0] = [1.0, 1.0, 0.0];
        assert!(m.validate().is_err());

        let mut m = LegModel::default();
        m.link_inertias[2][0][1] = 1e-3;
        assert!(m.validate().is_err());

        let m = LegModel {
            n_dof: 2,
            ..LegModel::default()
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = LegModel::default();
        let text = serde_json::to_string_pretty(&m).unwrap();
        assert_eq!(LegModel::from_json(&text).unwrap(), m);
    }

    #[test]
    fn mass_scale_applies_to_inertia() {
        let m = LegModel::default().with_mass_scale(1.1);
        assert!((m.link_masses[1] - 1.1).abs() < 1e-15);
        assert!((m.link_inertias[1][0][0] - 3.7e-3 * 1.1).abs() < 1e-15);
    }
}
