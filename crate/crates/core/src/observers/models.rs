//! Mode-dependent process and measurement models for the momentum/force state
//! `x = [p; f_ext]`.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

use super::kf::ProcessModel;
use crate::dynamics::{mass_matrix, LegModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactMode {
    Swing,
    Stance,
    Collision,
}

impl ContactMode {
    pub const ALL: [ContactMode; 3] = [ContactMode::Swing, ContactMode::Stance, ContactMode::Collision];

    pub fn index(self) -> usize {
        match self {
            ContactMode::Swing => 0,
            ContactMode::Stance => 1,
            ContactMode::Collision => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ContactMode::Swing => "swing",
            ContactMode::Stance => "stance",
            ContactMode::Collision => "collision",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Whether the external force enters the momentum dynamics.
    pub fn force_selected(self) -> bool {
        self != ContactMode::Swing
    }
}

impl std::fmt::Display for ContactMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which noise level a cone-consistent pseudo force receives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeNoisePolarity {
    /// Small variance inside the mode's cone, large outside.
    #[default]
    SmallInside,
    /// Large variance inside the mode's cone, small outside.
    LargeInside,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// `A_d = I + A dt`.
    #[default]
    Euler,
    /// `A_d = exp(A dt)` in closed form.
    Exact,
}

/// Process and measurement noise levels.
///
/// `default()` is the setup the IMM is tuned for; `reference()` keeps the nominal
/// force noise levels, under which mode switching stalls because a mixed prior can
/// never reach a pseudo force that jumps by tens of newtons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Diagonal of the force drift matrix (1/s), all entries negative.
    pub a_f: [f64; 3],
    /// Momentum process noise density.
    pub w_p: f64,
    /// Force process noise density.
    pub w_f: f64,
    /// Momentum measurement variance.
    pub v_p: f64,
    pub v_f_small: f64,
    pub v_f_large: f64,
    pub cone_noise_polarity: ConeNoisePolarity,
    pub discretization: Discretization,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            w_f: 1e7,
            v_f_large: 1e5,
            ..Self::reference()
        }
    }
}

impl NoiseConfig {
    pub fn reference() -> Self {
        Self {
            a_f: [-0.01; 3],
            w_p: 1e-4,
            w_f: 10.0,
            v_p: 1e-4,
            v_f_small: 1e-3,
            v_f_large: 200.0,
            cone_noise_polarity: ConeNoisePolarity::SmallInside,
            discretization: Discretization::Euler,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_f.iter().any(|&a| !(a < 0.0)) {
            return Err(Error::config("noise.a_f", "diagonal entries must be negative"));
        }
        for (name, v) in [
            ("noise.w_p", self.w_p),
            ("noise.w_f", self.w_f),
            ("noise.v_p", self.v_p),
            ("noise.v_f_small", self.v_f_small),
            ("noise.v_f_large", self.v_f_large),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be positive and finite"));
            }
        }
        if self.v_f_small >= self.v_f_large {
            return Err(Error::config("noise.v_f_small", "must be smaller than v_f_large"));
        }
        Ok(())
    }
}

/// Circular cone of admissible contact-force directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrictionCone {
    pub axis: [f64; 3],
    /// Half opening angle (rad).
    pub half_angle: f64,
    /// Forces weaker than this (N) are never inside the cone.
    pub min_magnitude: f64,
}

impl FrictionCone {
    pub fn new(axis: Vector3<f64>, half_angle: f64, min_magnitude: f64) -> Result<Self> {
        let cone = Self {
            axis: axis.normalize().into(),
            half_angle,
            min_magnitude,
        };
        cone.validate("cone")?;
        Ok(cone)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let norm = Vector3::from(self.axis).norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("{field}.axis"), "must be a unit vector"));
        }
        if !(self.half_angle > 0.0 && self.half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::config(format!("{field}.half_angle"), "must lie in (0, π/2)"));
        }
        if !(self.min_magnitude >= 0.0) {
            return Err(Error::config(format!("{field}.min_magnitude"), "must be nonnegative"));
        }
        Ok(())
    }

    pub fn contains(&self, f: &Vector3<f64>) -> bool {
        let mag = f.norm();
        if mag < self.min_magnitude || mag == 0.0 {
            return false;
        }
        let cos = f.dot(&Vector3::from(self.axis)) / mag;
        cos >= self.half_angle.cos()
    }
}

/// Cones for the two contact modes that carry force.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCones {
    pub stance: FrictionCone,
    pub collision: FrictionCone,
}

impl Default for ModeCones {
    /// Vertical 40° stance cone and a 60° collision cone opposing a +x heading. The
    /// collision cone ignores forces below 20 N, the level swing-phase inertia alone
    /// can push the pseudo force to.
    fn default() -> Self {
        Self::for_heading(Vector3::x())
    }
}

impl ModeCones {
    pub fn for_heading(heading: Vector3<f64>) -> Self {
        Self {
            stance: FrictionCone {
                axis: [0.0, 0.0, 1.0],
                half_angle: 40f64.to_radians(),
                min_magnitude: 5.0,
            },
            collision: FrictionCone {
                axis: (-heading.normalize()).into(),
                half_angle: 60f64.to_radians(),
                min_magnitude: 20.0,
            },
        }
    }

    pub fn get(&self, mode: ContactMode) -> Option<&FrictionCone> {
        match mode {
            ContactMode::Swing => None,
            ContactMode::Stance => Some(&self.stance),
            ContactMode::Collision => Some(&self.collision),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stance.validate("cones.stance")?;
        self.collision.validate("cones.collision")
    }
}

fn force_selection(mode: ContactMode, jac: &Matrix3xX<f64>) -> DMatrix<f64> {
    let n = jac.ncols();
    if mode.force_selected() {
        DMatrix::from_fn(n, 3, |r, c| jac[(c, r)])
    } else {
        DMatrix::zeros(n, 3)
    }
}

/// Discrete process model of mode `mode` for a leg with contact Jacobian `jac`.
///
/// Continuous model `A = [[0, S Jᵀ], [0, A_f]]`, `B = [I; 0]`, with `S = 0` in swing.
pub fn build_process_model(
    mode: ContactMode,
    jac: &Matrix3xX<f64>,
    cfg: &NoiseConfig,
    dt: f64,
) -> ProcessModel {
    let n = jac.ncols();
    let dim = n + 3;
    let coupling = force_selection(mode, jac);
    let mut a = DMatrix::identity(dim, dim);
    match cfg.discretization {
        Discretization::Euler => {
            a.view_mut((0, n), (n, 3)).copy_from(&(coupling * dt));
            for i in 0..3 {
                a[(n + i, n + i)] += cfg.a_f[i] * dt;
            }
        }
        Discretization::Exact => {
            // exp([[0, G], [0, D]] dt) = [[I, G Φ], [0, e^{D dt}]], Φ = ∫₀^dt e^{D s} ds
            let mut phi = DMatrix::zeros(3, 3);
            for i in 0..3 {
                let rate = cfg.a_f[i];
                phi[(i, i)] = (rate * dt).exp_m1() / rate;
                a[(n + i, n + i)] = (rate * dt).exp();
            }
            a.view_mut((0, n), (n, 3)).copy_from(&(coupling * phi));
        }
    }
    let mut b = DMatrix::zeros(dim, n);
    b.view_mut((0, 0), (n, n)).fill_with_identity();
    b *= dt;
    let mut q = DMatrix::zeros(dim, dim);
    for i in 0..n {
        q[(i, i)] = cfg.w_p * dt;
    }
    for i in 0..3 {
        q[(n + i, n + i)] = cfg.w_f * dt;
    }
    ProcessModel { a, b, q }
}

/// Measured generalized momentum `M̂(q) q̇` using the estimator's model.
pub fn gm_measurement(model_hat: &LegModel, q: &[f64], qd: &[f64]) -> DVector<f64> {
    mass_matrix(model_hat, q) * DVector::from_column_slice(qd)
}

/// Force pseudo-measurement and its noise for mode `mode`.
pub fn mode_measurement(
    mode: ContactMode,
    f_pse: &Vector3<f64>,
    cones: &ModeCones,
    cfg: &NoiseConfig,
) -> (Vector3<f64>, Matrix3<f64>) {
    match cones.get(mode) {
        None => (Vector3::zeros(), Matrix3::identity() * cfg.v_f_small),
        Some(cone) => {
            let inside = cone.contains(f_pse);
            let small = match cfg.cone_noise_polarity {
                ConeNoisePolarity::SmallInside => inside,
                ConeNoisePolarity::LargeInside => !inside,
            };
            let var = if small { cfg.v_f_small } else { cfg.v_f_large };
            (*f_pse, Matrix3::identity() * var)
        }
    }
}
