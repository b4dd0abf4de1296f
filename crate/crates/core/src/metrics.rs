//! Detection and force-accuracy metrics over per-tick mode and force sequences.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observers::ContactMode;

/// Half-open tick range `[start, end)` of a maximal run of one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Episode {
    pub start: usize,
    pub end: usize,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

pub fn episodes(modes: &[ContactMode], mode: ContactMode) -> Vec<Episode> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in modes.iter().enumerate() {
        match (m == mode, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Episode { start: s, end: i });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Episode { start: s, end: modes.len() });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub truth_start: f64,
    pub truth_end: f64,
    pub detected_at: Option<f64>,
    pub delay: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detections {
    pub events: Vec<DetectionEvent>,
    pub false_positives: usize,
}

impl Detections {
    pub fn successes(&self) -> usize {
        self.events.iter().filter(|e| e.detected_at.is_some()).count()
    }

    pub fn false_negatives(&self) -> usize {
        self.events.len() - self.successes()
    }
}

/// Matches estimated collision runs against true collision episodes.
///
/// An episode `[s, e)` is detected by the first estimated collision tick inside
/// `[s − early_window, e)`; the delay is measured from `s` and clamped at zero.
/// Each maximal estimated run touching no such window is one false positive.
pub fn match_detections(mode_true: &[ContactMode], mode_est: &[ContactMode], dt: f64, early_window: f64) -> Result<Detections> {
    if mode_true.len() != mode_est.len() {
        return Err(Error::InvalidArgument(format!(
            "mode sequences differ in length ({} vs {})",
            mode_true.len(),
            mode_est.len()
        )));
    }
    let early = (early_window / dt).round() as usize;
    let truth = episodes(mode_true, ContactMode::Collision);
    let windows: Vec<(usize, usize)> = truth.iter().map(|ep| (ep.start.saturating_sub(early), ep.end)).collect();
    let events = truth
        .iter()
        .zip(&windows)
        .map(|(ep, &(lo, hi))| {
            let hit = (lo..hi).find(|&i| mode_est[i] == ContactMode::Collision);
            DetectionEvent {
                truth_start: ep.start as f64 * dt,
                truth_end: ep.end as f64 * dt,
                detected_at: hit.map(|i| i as f64 * dt),
                delay: hit.map(|i| i.saturating_sub(ep.start) as f64 * dt),
            }
        })
        .collect();
    let false_positives = episodes(mode_est, ContactMode::Collision)
        .iter()
        .filter(|run| !windows.iter().any(|&(lo, hi)| run.start < hi && lo < run.end))
        .count();
    Ok(Detections { events, false_positives })
}

/// `|‖F̂‖ / ‖F‖ − 1| · 100` for a single pair of forces.
pub fn abs_error_pct(f_hat: &Vector3<f64>, f_true: &Vector3<f64>) -> Result<f64> {
    let norm = f_true.norm();
    if !(norm > 0.0) {
        return Err(Error::UndefinedMetric("true force is zero at the evaluation tick".into()));
    }
    Ok(((f_hat.norm() / norm - 1.0) * 100.0).abs())
}

/// Relative magnitude error at the tick of peak true force within the window.
pub fn force_abs_error(f_hat: &[Vector3<f64>], f_true: &[Vector3<f64>]) -> Result<f64> {
    let peak = f_true
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::UndefinedMetric("empty evaluation window".into()))?;
    abs_error_pct(&f_hat[peak], &f_true[peak])
}

/// Sum of squared vector errors and tick count over the ticks selected by `mask`.
fn squared_error(f_hat: &[Vector3<f64>], f_true: &[Vector3<f64>], mask: impl Fn(usize) -> bool) -> (f64, usize) {
    (0..f_true.len())
        .filter(|&i| mask(i))
        .fold((0.0, 0), |(s, n), i| (s + (f_hat[i] - f_true[i]).norm_squared(), n + 1))
}

/// Vector RMSE over ticks whose true mode is `phase`; `None` when there are none.
pub fn phase_rmse(f_hat: &[Vector3<f64>], f_true: &[Vector3<f64>], mode_true: &[ContactMode], phase: ContactMode) -> Option<f64> {
    let (sum, n) = squared_error(f_hat, f_true, |i| mode_true[i] == phase);
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Ticks within `window` seconds after each collision episode that are not
/// themselves collision ticks.
pub fn post_collision_mask(mode_true: &[ContactMode], dt: f64, window: f64) -> Vec<bool> {
    let len = (window / dt).round() as usize;
    let mut mask = vec![false; mode_true.len()];
    for ep in episodes(mode_true, ContactMode::Collision) {
        for i in ep.end..(ep.end + len).min(mode_true.len()) {
            mask[i] = mode_true[i] != ContactMode::Collision;
        }
    }
    mask
}

pub fn post_collision_rmse(f_hat: &[Vector3<f64>], f_true: &[Vector3<f64>], mode_true: &[ContactMode], dt: f64, window: f64) -> Option<f64> {
    let mask = post_collision_mask(mode_true, dt, window);
    let (sum, n) = squared_error(f_hat, f_true, |i| mask[i]);
    (n > 0).then(|| (sum / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpulseStats {
    pub count: usize,
    pub avg_impulse: f64,
    pub avg_duration: f64,
}

/// Average collision impulse `Σ‖f‖ dt` and duration per true collision episode.
pub fn impulse_and_duration(f_true: &[Vector3<f64>], mode_true: &[ContactMode], dt: f64) -> ImpulseStats {
    let eps = episodes(mode_true, ContactMode::Collision);
    if eps.is_empty() {
        return ImpulseStats {
            count: 0,
            avg_impulse: 0.0,
            avg_duration: 0.0,
        };
    }
    let impulse: f64 = eps.iter().map(|ep| f_true[ep.start..ep.end].iter().map(|f| f.norm() * dt).sum::<f64>()).sum();
    let duration: f64 = eps.iter().map(|ep| ep.len() as f64 * dt).sum();
    ImpulseStats {
        count: eps.len(),
        avg_impulse: impulse / eps.len() as f64,
        avg_duration: duration / eps.len() as f64,
    }
}

/// RMSE of the velocity tracking error over the selected ticks.
pub fn velocity_rmse(vel: &[Vector3<f64>], vel_ref: &[Vector3<f64>], mask: &[bool]) -> Option<f64> {
    let (sum, n) = squared_error(vel, vel_ref, |i| mask[i]);
    (n > 0).then(|| (sum / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ContactMode::{Collision as C, Stance as T, Swing as S};

    fn seq(runs: &[(ContactMode, usize)]) -> Vec<ContactMode> {
        runs.iter().flat_map(|&(m, n)| std::iter::repeat_n(m, n)).collect()
    }

    #[test]
    fn detection_with_delay() {
        let truth = seq(&[(S, 110), (C, 50), (S, 40)]);
        let est = seq(&[(S, 125), (C, 30), (S, 45)]);
        let d = match_detections(&truth, &est, 1e-3, 0.01).unwrap();
        assert_eq!(d.successes(), 1);
        assert_eq!(d.false_positives, 0);
        assert!((d.events[0].delay.unwrap() - 0.015).abs() < 1e-12);
        assert!((d.events[0].truth_start - 0.110).abs() < 1e-12);
    }

    #[test]
    fn false_positive_and_negative() {
        let truth = seq(&[(S, 100), (T, 100), (S, 50), (C, 20), (S, 30)]);
        let est = seq(&[(S, 40), (C, 5), (S, 255)]);
        let d = match_detections(&truth, &est, 1e-3, 0.01).unwrap();
        assert_eq!(d.false_positives, 1);
        assert_eq!(d.false_negatives(), 1);
        assert_eq!(d.successes(), 0);
    }

    #[test]
    fn early_detection_inside_window_counts_with_zero_delay() {
        let truth = seq(&[(S, 100), (C, 20), (S, 30)]);
        let est = seq(&[(S, 95), (C, 10), (S, 45)]);
        let d = match_detections(&truth, &est, 1e-3, 0.01).unwrap();
        assert_eq!((d.successes(), d.false_positives), (1, 0));
        assert_eq!(d.events[0].delay, Some(0.0));
        let too_early = seq(&[(S, 50), (C, 10), (S, 90)]);
        let d = match_detections(&truth, &too_early, 1e-3, 0.01).unwrap();
        assert_eq!((d.successes(), d.false_positives), (0, 1));
    }

    #[test]
    fn rejects_mismatched_lengths() {
        assert!(match_detections(&[S, S], &[S], 1e-3, 0.01).is_err());
    }

    #[test]
    fn abs_error_examples() {
        let f = Vector3::new(3.0, -4.0, 12.0);
        assert!(abs_error_pct(&f, &f).unwrap().abs() < 1e-12);
        assert!((abs_error_pct(&(f * 1.5), &f).unwrap() - 50.0).abs() < 1e-12);
        assert!((abs_error_pct(&Vector3::zeros(), &f).unwrap() - 100.0).abs() < 1e-12);
        assert!(abs_error_pct(&f, &Vector3::zeros()).is_err());
    }

    #[test]
    fn abs_error_uses_peak_tick() {
        let truth = vec![Vector3::new(-10.0, 0.0, 0.0), Vector3::new(-40.0, 0.0, 0.0), Vector3::new(-20.0, 0.0, 0.0)];
        let est = vec![Vector3::zeros(), Vector3::new(-30.0, 0.0, 0.0), Vector3::zeros()];
        assert!((force_abs_error(&est, &truth).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn phase_rmse_examples() {
        let modes = seq(&[(S, 10), (T, 10)]);
        let truth: Vec<_> = (0..20).map(|i| Vector3::new(0.0, 0.0, i as f64)).collect();
        assert_eq!(phase_rmse(&truth, &truth, &modes, S), Some(0.0));
        let off: Vec<_> = truth.iter().map(|f| f + Vector3::new(3.0, 0.0, 0.0)).collect();
        assert!((phase_rmse(&off, &truth, &modes, T).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(phase_rmse(&off, &truth, &modes, C), None);
    }

    #[test]
    fn post_collision_window() {
        let modes = seq(&[(S, 10), (C, 5), (S, 200)]);
        let mask = post_collision_mask(&modes, 1e-3, 0.1);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 100);
        assert!(mask[15] && mask[114] && !mask[115] && !mask[14]);
    }

    #[test]
    fn impulse_examples() {
        let modes = seq(&[(S, 10), (C, 50), (S, 10)]);
        let f: Vec<_> = modes.iter().map(|&m| if m == C { Vector3::new(-20.0, 0.0, 0.0) } else { Vector3::zeros() }).collect();
        let stats = impulse_and_duration(&f, &modes, 1e-3);
        assert_eq!(stats.count, 1);
        assert!((stats.avg_impulse - 1.0).abs() < 1e-12);
        assert!((stats.avg_duration - 0.05).abs() < 1e-12);

        let none = impulse_and_duration(&f[..10], &modes[..10], 1e-3);
        assert_eq!((none.count, none.avg_impulse, none.avg_duration), (0, 0.0, 0.0));

        let modes = seq(&[(C, 10), (S, 5), (C, 30)]);
        let f: Vec<_> = (0..45).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let stats = impulse_and_duration(&f, &modes, 1e-3);
        let first: f64 = (0..10).map(|i| i as f64 * 1e-3).sum();
        let second: f64 = (15..45).map(|i| i as f64 * 1e-3).sum();
        assert!((stats.avg_impulse - (first + second) / 2.0).abs() < 1e-12);
        assert!((stats.avg_duration - 0.02).abs() < 1e-12);
    }
}
