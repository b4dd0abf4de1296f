//! Rigid-body dynamics of a single serial leg.

mod model;
mod spatial;
mod terms;

pub use model::{BaseTransform, JointReading, LegModel};
pub use terms::{
    contact_jacobian, dynamics_terms, forward_dynamics, friction_torque, generalized_momentum,
    inverse_dynamics, inverse_kinematics, jacobian_dot, mass_matrix, mechanical_energy,
    ChainKinematics, DynamicsTerms, COULOMB_SMOOTHING,
};
pub(crate) use terms::jacobian_dot_from;
