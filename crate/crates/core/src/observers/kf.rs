//! Linear Kalman filter recursion shared by every momentum observer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Mean and covariance of a Gaussian state estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct KfState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl KfState {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>) -> Self {
        Self { x, p }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }
}

/// Discrete-time transition `x' = A x + B u + w`, `w ~ N(0, Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

/// Result of a measurement update.
#[derive(Clone, Debug, PartialEq)]
pub struct Update {
    pub state: KfState,
    pub innovation: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn kf_predict(state: &KfState, model: &ProcessModel, u: &DVector<f64>) -> KfState {
    let x = &model.a * &state.x + &model.b * u;
    let mut p = &model.a * &state.p * model.a.transpose() + &model.q;
    symmetrize(&mut p);
    KfState { x, p }
}

/// Measurement update with the Joseph-form covariance
/// `P⁺ = (I − KC) P (I − KC)ᵀ + K R Kᵀ`.
pub fn kf_update(
    state: &KfState,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<Update> {
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidMeasurement("measurement contains non-finite entries".into()));
    }
    let innovation = y - c * &state.x;
    let pct = &state.p * c.transpose();
    let mut s = c * &pct + r;
    symmetrize(&mut s);
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidMeasurement("innovation covariance is not positive definite".into()))?;
    // K = P Cᵀ S⁻¹  ⇔  S Kᵀ = C P
    let gain = chol.solve(&pct.transpose()).transpose();
    let x = &state.x + &gain * &innovation;
    let i_kc = DMatrix::identity(state.dim(), state.dim()) - &gain * c;
    let mut p = &i_kc * &state.p * i_kc.transpose() + &gain * r * gain.transpose();
    symmetrize(&mut p);
    Ok(Update {
        state: KfState { x, p },
        innovation,
        innovation_cov: s,
    })
}
