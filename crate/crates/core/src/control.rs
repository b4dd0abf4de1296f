//! Swing-leg collision reaction: step-height reflex, admittance law and the
//! force-free operational-space baseline.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Virtual mass, damping and stiffness of the per-axis admittance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceParams {
    pub m_a: f64,
    pub d_a: f64,
    pub k_a: f64,
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        Self {
            m_a: 0.1,
            d_a: 20.0,
            k_a: 100.0,
        }
    }
}

impl AdmittanceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_a > 0.0) || !(self.d_a >= 0.0) || !(self.k_a >= 0.0) {
            return Err(Error::config("admittance", "need m_a > 0 and d_a, k_a >= 0"));
        }
        Ok(())
    }

    /// Tracking gains with the same closed-loop dynamics when no force is applied.
    pub fn osc_gains(&self) -> OscGains {
        OscGains {
            kp: self.k_a / self.m_a,
            kd: self.d_a / self.m_a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscGains {
    pub kp: f64,
    pub kd: f64,
}

/// `r̈ = M_a⁻¹ (f̂ − D_a (ṙ − ṙ_d) − K_a (r − r_d)) + r̈_d` for one axis.
pub fn admittance_accel(f_hat: f64, r: f64, rd: f64, rdot: f64, rdot_d: f64, rddot_d: f64, params: &AdmittanceParams) -> f64 {
    (f_hat - params.d_a * (rdot - rdot_d) - params.k_a * (r - rd)) / params.m_a + rddot_d
}

/// `r̈ = K_p (r_d − r) + K_d (ṙ_d − ṙ) + r̈_d` for one axis.
pub fn osc_accel(r: f64, rd: f64, rdot: f64, rdot_d: f64, rddot_d: f64, gains: &OscGains) -> f64 {
    gains.kp * (rd - r) + gains.kd * (rdot_d - rdot) + rddot_d
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflexConfig {
    /// Added to the foot height at the moment of the collision to form the new apex (m).
    pub height_increase: f64,
    /// Latest swing phase at which a collision still triggers the reflex.
    pub trigger_window: f64,
}

impl Default for ReflexConfig {
    fn default() -> Self {
        Self {
            height_increase: 0.10,
            trigger_window: 0.5,
        }
    }
}

impl ReflexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.height_increase > 0.0) {
            return Err(Error::config("reflex.height_increase", "must be positive"));
        }
        if !(self.trigger_window > 0.0 && self.trigger_window <= 1.0) {
            return Err(Error::config("reflex.trigger_window", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Swing-foot path over the phase interval `[s0, 1]`, in a frame fixed to the ground.
///
/// The horizontal coordinates follow a cycloid from `start` to `end`; the height
/// rises from `start.z` to `apex` and falls to `end.z` on two cosine half-waves.
/// Velocity vanishes at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwingProfile {
    pub s0: f64,
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    pub apex: f64,
}

/// Position and its first two derivatives with respect to swing phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub pos: Vector3<f64>,
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
}

impl SwingProfile {
    pub fn nominal(start: Vector3<f64>, end: Vector3<f64>, height: f64) -> Self {
        Self {
            s0: 0.0,
            start,
            end,
            apex: start.z.max(end.z) + height,
        }
    }

    pub fn eval(&self, s: f64) -> PhasePoint {
        let span = 1.0 - self.s0;
        let u = ((s - self.s0) / span).clamp(0.0, 1.0);
        let w = 2.0 * PI * u;
        let (cyc, cyc1, cyc2) = (u - w.sin() / (2.0 * PI), 1.0 - w.cos(), 2.0 * PI * w.sin());
        let base = if u <= 0.5 { self.start.z } else { self.end.z };
        let lift = self.apex - base;
        let (z, z1, z2) = (base + lift * 0.5 * (1.0 - w.cos()), lift * PI * w.sin(), lift * 2.0 * PI * PI * w.cos());
        let dxy = self.end - self.start;
        let k = 1.0 / span;
        PhasePoint {
            pos: Vector3::new(self.start.x + dxy.x * cyc, self.start.y + dxy.y * cyc, z),
            d1: Vector3::new(dxy.x * cyc1, dxy.y * cyc1, z1) * k,
            d2: Vector3::new(dxy.x * cyc2, dxy.y * cyc2, z2) * (k * k),
        }
    }
}

/// Reflex re-planning after a collision at `swing_phase` with the foot at `foot_pos`.
///
/// Inside the trigger window the new apex is the current foot height plus the
/// configured increase and the path is re-interpolated to the original foothold.
/// Later collisions leave the profile unchanged.
pub fn reflex_adjust(swing_phase: f64, foot_pos: &Vector3<f64>, original: &SwingProfile, cfg: &ReflexConfig) -> SwingProfile {
    if swing_phase > cfg.trigger_window || swing_phase >= 1.0 {
        return *original;
    }
    SwingProfile {
        s0: swing_phase,
        start: *foot_pos,
        end: original.end,
        apex: foot_pos.z + cfg.height_increase,
    }
}
