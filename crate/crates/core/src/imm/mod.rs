//! Interacting multiple-model estimation over the swing, stance and collision modes.
//!
//! One cycle runs interaction (mixing), per-mode filtering, the mode-probability
//! update and the combination of the mode-conditioned estimates. The generic
//! [`imm_cycle`] works for any number of modes; [`ImmEstimator`] wires it to the
//! leg models for the three contact modes.

mod classifier;
mod estimator;

pub use classifier::ModeClassifier;
pub use estimator::{imm_step, EstimateOutput, ImmEstimator, ImmSettings, ImmState};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observers::{kf_predict, kf_update, symmetrize, KfState, ProcessModel};

/// Mixing weights below this are treated as an unreachable mode.
pub const MIN_MIXING_MASS: f64 = 1e-12;

/// Row-stochastic Markov transition matrix; `pi[i][j]` is Pr(next = j | current = i).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tpm {
    pub pi: [[f64; 3]; 3],
}

impl Default for Tpm {
    fn default() -> Self {
        Self::with_persistence(0.8, 0.8, 0.8)
    }
}

impl Tpm {
    /// Swing may go anywhere; stance and collision only return to swing.
    pub fn with_persistence(swing: f64, stance: f64, collision: f64) -> Self {
        let leave = (1.0 - swing) / 2.0;
        Self {
            pi: [
                [swing, leave, leave],
                [1.0 - stance, stance, 0.0],
                [1.0 - collision, 0.0, collision],
            ],
        }
    }

    pub fn identity() -> Self {
        Self {
            pi: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.pi.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::config(format!("tpm.pi[{i}]"), "entries must lie in [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!("tpm.pi[{i}]"), format!("row sums to {sum}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |i, j| self.pi[i][j])
    }
}

/// Probability of each mode being active.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeBelief {
    pub mu: [f64; 3],
}

impl ModeBelief {
    pub fn new(mu: [f64; 3]) -> Result<Self> {
        let sum: f64 = mu.iter().sum();
        if mu.iter().any(|&m| !(m >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("{mu:?} is not a probability vector")));
        }
        Ok(Self { mu })
    }

    pub fn argmax(&self) -> (usize, f64) {
        self.mu
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, m)| if m > best.1 { (i, m) } else { best })
    }
}

/// Mixed initial conditions for every mode-matched filter.
#[derive(Clone, Debug)]
pub struct Interaction {
    /// Predicted mode probabilities `c_k = Σ_j π_jk μ_j`.
    pub c: Vec<f64>,
    pub mixed: Vec<KfState>,
    /// Modes whose predicted mass fell below [`MIN_MIXING_MASS`] and kept their prior.
    pub unreachable: Vec<bool>,
}

/// Applies a probability floor and renormalizes.
pub fn floor_probabilities(mu: &[f64], floor: f64) -> Vec<f64> {
    let floored: Vec<f64> = mu.iter().map(|&m| m.max(floor)).collect();
    let sum: f64 = floored.iter().sum();
    floored.into_iter().map(|m| m / sum).collect()
}

pub fn interaction_step(filters: &[KfState], mu: &[f64], pi: &DMatrix<f64>) -> Interaction {
    let m = filters.len();
    let mut c = vec![0.0; m];
    let mut mixed = Vec::with_capacity(m);
    let mut unreachable = vec![false; m];
    for k in 0..m {
        c[k] = (0..m).map(|j| pi[(j, k)] * mu[j]).sum();
        if c[k] < MIN_MIXING_MASS {
            unreachable[k] = true;
            mixed.push(filters[k].clone());
            continue;
        }
        let weights: Vec<f64> = (0..m).map(|j| pi[(j, k)] * mu[j] / c[k]).collect();
        let mut x = DVector::zeros(filters[k].dim());
        for (w, f) in weights.iter().zip(filters) {
            x += &f.x * *w;
        }
        let mut p = DMatrix::zeros(x.len(), x.len());
        for (w, f) in weights.iter().zip(filters) {
            if *w == 0.0 {
                continue;
            }
            let d = &x - &f.x;
            p += (&f.p + &d * d.transpose()) * *w;
        }
        symmetrize(&mut p);
        mixed.push(KfState { x, p });
    }
    Interaction { c, mixed, unreachable }
}

/// Log of the Gaussian density of `innovation` under covariance `s`.
pub fn log_likelihood(innovation: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    let Some(chol) = s.clone().cholesky() else {
        return f64::NEG_INFINITY;
    };
    let solved = chol.solve(innovation);
    let log_det: f64 = chol.l_dirty().diagonal().iter().take(s.nrows()).map(|d| 2.0 * d.ln()).sum();
    let k = innovation.len() as f64;
    -0.5 * (innovation.dot(&solved) + log_det + k * (2.0 * std::f64::consts::PI).ln())
}

/// Posterior mode probabilities `μ_k ∝ c_k L_k`, computed with max-subtraction in
/// log space. Returns `(μ, fell_back)`; when every likelihood vanishes the predicted
/// probabilities `c` are returned unchanged.
pub fn probability_update(c: &[f64], log_likelihoods: &[f64]) -> (Vec<f64>, bool) {
    let scores: Vec<f64> = c
        .iter()
        .zip(log_likelihoods)
        .map(|(&ck, &ll)| if ck > 0.0 { ck.ln() + ll } else { f64::NEG_INFINITY })
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let sum: f64 = c.iter().sum();
        return (c.iter().map(|v| v / sum).collect(), true);
    }
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    (weights.into_iter().map(|w| w / total).collect(), false)
}

/// Moment-matched Gaussian of the mode-conditioned estimates.
pub fn combination_step(filters: &[KfState], mu: &[f64]) -> KfState {
    let dim = filters[0].dim();
    let mut x = DVector::zeros(dim);
    for (f, &w) in filters.iter().zip(mu) {
        x += &f.x * w;
    }
    let mut p = DMatrix::zeros(dim, dim);
    for (f, &w) in filters.iter().zip(mu) {
        if w == 0.0 {
            continue;
        }
        let d = &x - &f.x;
        p += (&f.p + &d * d.transpose()) * w;
    }
    symmetrize(&mut p);
    KfState { x, p }
}

/// Model and data for one mode-matched filter during one cycle.
#[derive(Clone, Debug)]
pub struct ModeStep {
    /// `None` skips the prediction (first sample of a stream).
    pub process: Option<ProcessModel>,
    pub input: DVector<f64>,
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub y: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct Cycle {
    pub filters: Vec<KfState>,
    pub mu: Vec<f64>,
    pub combined: KfState,
    /// Normalized innovation squared `ỹᵀ S⁻¹ ỹ` per mode.
    pub nis: Vec<f64>,
    pub log_likelihoods: Vec<f64>,
    /// Modes whose filter produced non-finite values and were reset.
    pub reset: Vec<bool>,
    pub likelihood_fallback: bool,
}

/// One interaction / filtering / probability-update / combination cycle.
///
/// `mu` is floored at `mu_floor` (then renormalized) before mixing. A filter whose
/// update fails or turns non-finite restarts from its mixed mean with covariance
/// `reset_cov` and takes no probability mass this cycle.
pub fn imm_cycle(
    filters: &[KfState],
    mu: &[f64],
    pi: &DMatrix<f64>,
    steps: &[ModeStep],
    mu_floor: f64,
    reset_cov: &DMatrix<f64>,
) -> Cycle {
    let m = filters.len();
    let floored = floor_probabilities(mu, mu_floor);
    let interaction = interaction_step(filters, &floored, pi);

    let mut out_filters = Vec::with_capacity(m);
    let mut nis = vec![f64::NAN; m];
    let mut log_liks = vec![f64::NEG_INFINITY; m];
    let mut reset = vec![false; m];
    for k in 0..m {
        let step = &steps[k];
        let prior = match &step.process {
            Some(model) => kf_predict(&interaction.mixed[k], model, &step.input),
            None => interaction.mixed[k].clone(),
        };
        match kf_update(&prior, &step.c, &step.r, &step.y) {
            Ok(update) if update.state.is_finite() => {
                if let Some(chol) = update.innovation_cov.clone().cholesky() {
                    nis[k] = update.innovation.dot(&chol.solve(&update.innovation));
                }
                log_liks[k] = log_likelihood(&update.innovation, &update.innovation_cov);
                out_filters.push(update.state);
            }
            _ => {
                reset[k] = true;
                let x = if interaction.mixed[k].x.iter().all(|v| v.is_finite()) {
                    interaction.mixed[k].x.clone()
                } else {
                    DVector::zeros(filters[k].dim())
                };
                out_filters.push(KfState::new(x, reset_cov.clone()));
            }
        }
    }

    let (mu_post, fallback) = probability_update(&interaction.c, &log_liks);
    let combined = combination_step(&out_filters, &mu_post);
    Cycle {
        filters: out_filters,
        mu: mu_post,
        combined,
        nis,
        log_likelihoods: log_liks,
        reset,
        likelihood_fallback: fallback,
    }
}
