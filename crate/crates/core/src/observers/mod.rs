//! Momentum-based observers: the Kalman recursion, mode-dependent models,
//! pseudo-force measurements and the single-filter baselines.

mod baselines;
mod kf;
mod models;
mod pseudo;

pub use baselines::{ConeClassifier, FoMbo, MomentumKf};
pub use kf::{kf_predict, kf_update, KfState, ProcessModel, Update};
pub use models::{
    build_process_model, gm_measurement, mode_measurement, ConeNoisePolarity, ContactMode,
    Discretization, FrictionCone, ModeCones, NoiseConfig,
};
pub use pseudo::{pseudo_force_simplified, pseudo_wrench, LegSignals, PseudoWrench, CONDITION_WARNING};
pub(crate) use kf::symmetrize;
