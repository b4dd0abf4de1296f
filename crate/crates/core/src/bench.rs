//! Observer benchmark and controller A/B harness over batches of simulated collisions.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::LegModel;
use crate::error::{Error, Result};
use crate::metrics::{episodes, force_abs_error, impulse_and_duration, match_detections, phase_rmse, post_collision_mask, velocity_rmse};
use crate::observer::{EstimatorConfig, ObserverKind};
use crate::observers::ContactMode;
use crate::sim::{simulate_with, ControllerKind, DetectionSource, Scenario, ScenarioTrace};

pub const OBSERVER_COLUMNS: [&str; 7] = [
    "Success/Total",
    "False positive",
    "False negative",
    "Delay (ms)",
    "Abs error (%)",
    "Swing RMSE (N)",
    "Post-collision RMSE (N)",
];

pub const CONTROLLER_COLUMNS: [&str; 4] = ["Total collisions", "Average duration (s)", "Velocity RMSE (m/s)", "Average impulse (Ns)"];

/// Batch layout and metric windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub scenarios: usize,
    pub collisions_per_scenario: usize,
    /// Estimator mass scale relative to the true leg.
    pub mass_scale: f64,
    pub early_window: f64,
    pub post_window: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scenarios: 10,
            collisions_per_scenario: 5,
            mass_scale: 1.1,
            early_window: 0.01,
            post_window: 0.1,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.collisions_per_scenario == 0 {
            return Err(Error::config("collisions_per_scenario", "must be at least 1"));
        }
        if !(self.mass_scale > 0.0) {
            return Err(Error::config("mass_scale", "must be positive"));
        }
        if !(self.early_window >= 0.0) || !(self.post_window > 0.0) {
            return Err(Error::config("windows", "early_window must be >= 0 and post_window > 0"));
        }
        Ok(())
    }

    /// Scenario `i` uses seed `seed + i`.
    pub fn batch(&self, seed: u64) -> Vec<Scenario> {
        (0..self.scenarios as u64)
            .map(|i| {
                let mut sc = Scenario::collision_course(self.collisions_per_scenario, seed.wrapping_add(i));
                sc.model_mismatch.mass_scale = self.mass_scale;
                sc
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverRow {
    pub observer: ObserverKind,
    pub success: usize,
    pub total: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub mean_delay_ms: Option<f64>,
    pub abs_error_pct: Option<f64>,
    pub swing_rmse_n: Option<f64>,
    pub post_collision_rmse_n: Option<f64>,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerRow {
    pub controller: ControllerKind,
    pub total_collisions: usize,
    pub avg_duration_s: f64,
    pub velocity_rmse: Option<f64>,
    pub avg_impulse_ns: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub observers: Vec<ObserverRow>,
    pub controllers: Vec<ControllerRow>,
}

/// Per scenario × observer accumulators, merged in scenario order.
#[derive(Clone, Debug, Default)]
struct Cell {
    success: usize,
    total: usize,
    false_positive: usize,
    delays: Vec<f64>,
    abs_errors: Vec<f64>,
    swing: (f64, usize),
    post: (f64, usize),
    diverged: bool,
}

impl Cell {
    fn merge(&mut self, other: Cell) {
        self.success += other.success;
        self.total += other.total;
        self.false_positive += other.false_positive;
        self.delays.extend(other.delays);
        self.abs_errors.extend(other.abs_errors);
        self.swing = (self.swing.0 + other.swing.0, self.swing.1 + other.swing.1);
        self.post = (self.post.0 + other.post.0, self.post.1 + other.post.1);
        self.diverged |= other.diverged;
    }

    fn row(self, observer: ObserverKind) -> ObserverRow {
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let rms = |(sum, n): (f64, usize)| (n > 0).then(|| (sum / n as f64).sqrt());
        let valid = !self.diverged;
        ObserverRow {
            observer,
            success: self.success,
            total: self.total,
            false_positive: self.false_positive,
            false_negative: self.total - self.success,
            mean_delay_ms: mean(&self.delays).filter(|_| valid).map(|d| d * 1e3),
            abs_error_pct: mean(&self.abs_errors).filter(|_| valid),
            swing_rmse_n: rms(self.swing).filter(|_| valid),
            post_collision_rmse_n: rms(self.post).filter(|_| valid),
            diverged: self.diverged,
        }
    }
}

fn squared_sum(err: Option<f64>, n: usize) -> (f64, usize) {
    err.map_or((0.0, 0), |e| (e * e * n as f64, n))
}

fn evaluate(trace: &ScenarioTrace, scenario: &Scenario, kind: ObserverKind, model: &LegModel, cfg: &EstimatorConfig, bench: &BenchConfig) -> Result<Cell> {
    let mut observer = cfg.build(kind, &scenario.estimator_model(model))?;
    let mut modes = Vec::with_capacity(trace.records.len());
    let mut forces: Vec<Vector3<f64>> = Vec::with_capacity(trace.records.len());
    for reading in trace.readings() {
        match observer.observe(reading) {
            Ok(out) => {
                modes.push(out.mode);
                forces.push(out.force);
            }
            Err(_) => {
                return Ok(Cell {
                    diverged: true,
                    ..Cell::default()
                })
            }
        }
    }
    let truth = trace.modes();
    let f_true = trace.forces();
    let det = match_detections(&truth, &modes, trace.dt, bench.early_window)?;
    let abs_errors = episodes(&truth, ContactMode::Collision)
        .iter()
        .filter_map(|ep| force_abs_error(&forces[ep.start..ep.end], &f_true[ep.start..ep.end]).ok())
        .collect();
    let swing_ticks = truth.iter().filter(|&&m| m == ContactMode::Swing).count();
    let post_ticks = post_collision_mask(&truth, trace.dt, bench.post_window).iter().filter(|&&m| m).count();
    Ok(Cell {
        success: det.successes(),
        total: det.events.len(),
        false_positive: det.false_positives,
        delays: det.events.iter().filter_map(|e| e.delay).collect(),
        abs_errors,
        swing: squared_sum(phase_rmse(&forces, &f_true, &truth, ContactMode::Swing), swing_ticks),
        post: squared_sum(crate::metrics::post_collision_rmse(&forces, &f_true, &truth, trace.dt, bench.post_window), post_ticks),
        diverged: false,
    })
}

/// Runs every observer on the identical noisy readings of each simulated scenario.
pub fn run_benchmark(
    observers: &[ObserverKind],
    scenarios: &[Scenario],
    model: &LegModel,
    cfg: &EstimatorConfig,
    bench: &BenchConfig,
) -> Result<BenchReport> {
    if scenarios.is_empty() {
        return Err(Error::InvalidArgument("scenario list is empty".into()));
    }
    if observers.is_empty() {
        return Err(Error::InvalidArgument("observer list is empty".into()));
    }
    bench.validate()?;
    cfg.validate()?;
    let cells: Vec<Vec<Cell>> = scenarios
        .par_iter()
        .map(|sc| {
            let trace = simulate_with(sc, model, cfg)?;
            observers.iter().map(|&kind| evaluate(&trace, sc, kind, model, cfg, bench)).collect()
        })
        .collect::<Result<_>>()?;
    let observers = observers
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let mut acc = Cell::default();
            for per_scenario in &cells {
                acc.merge(per_scenario[j].clone());
            }
            acc.row(kind)
        })
        .collect();
    Ok(BenchReport {
        observers,
        controllers: Vec::new(),
    })
}

/// Runs each scenario under both swing controllers. Both react to collisions
/// reported by the in-loop IMM estimator.
pub fn run_ab(scenarios: &[Scenario], model: &LegModel, cfg: &EstimatorConfig, kinds: &[ControllerKind]) -> Result<Vec<ControllerRow>> {
    if scenarios.is_empty() {
        return Err(Error::InvalidArgument("scenario list is empty".into()));
    }
    kinds
        .iter()
        .map(|&kind| {
            let stats: Vec<(usize, f64, f64, (f64, usize))> = scenarios
                .par_iter()
                .map(|sc| {
                    let mut sc = sc.clone();
                    sc.controller.kind = kind;
                    sc.controller.detection = DetectionSource::Estimator;
                    let trace = simulate_with(&sc, model, cfg)?;
                    let s = impulse_and_duration(&trace.forces(), &trace.modes(), trace.dt);
                    let vel: Vec<_> = trace.records.iter().map(|r| r.foot_vel).collect();
                    let vel_ref: Vec<_> = trace.records.iter().map(|r| r.ref_vel).collect();
                    let mask: Vec<bool> = trace.records.iter().map(|r| r.swing).collect();
                    let n = mask.iter().filter(|&&m| m).count();
                    let vr = squared_sum(velocity_rmse(&vel, &vel_ref, &mask), n);
                    Ok((s.count, s.avg_impulse * s.count as f64, s.avg_duration * s.count as f64, vr))
                })
                .collect::<Result<_>>()?;
            let count: usize = stats.iter().map(|s| s.0).sum();
            let per = |total: f64| if count == 0 { 0.0 } else { total / count as f64 };
            let (vsum, vn) = stats.iter().fold((0.0, 0), |a, s| (a.0 + s.3 .0, a.1 + s.3 .1));
            Ok(ControllerRow {
                controller: kind,
                total_collisions: count,
                avg_duration_s: per(stats.iter().map(|s| s.2).sum()),
                velocity_rmse: (vn > 0).then(|| (vsum / vn as f64).sqrt()),
                avg_impulse_ns: per(stats.iter().map(|s| s.1).sum()),
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

impl ObserverRow {
    fn cells(&self) -> Vec<String> {
        if self.diverged {
            return std::iter::repeat_n("divergent".to_string(), OBSERVER_COLUMNS.len()).collect();
        }
        vec![
            format!("{}/{}", self.success, self.total),
            self.false_positive.to_string(),
            self.false_negative.to_string(),
            fmt_opt(self.mean_delay_ms, 2),
            fmt_opt(self.abs_error_pct, 2),
            fmt_opt(self.swing_rmse_n, 3),
            fmt_opt(self.post_collision_rmse_n, 3),
        ]
    }
}

impl ControllerRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.total_collisions.to_string(),
            format!("{:.4}", self.avg_duration_s),
            fmt_opt(self.velocity_rmse, 4),
            format!("{:.4}", self.avg_impulse_ns),
        ]
    }
}

fn csv_line(cells: impl IntoIterator<Item = String>) -> String {
    let mut line = cells
        .into_iter()
        .map(|c| if c.contains(',') { format!("\"{c}\"") } else { c })
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

fn table(title: &str, header: &[&str], rows: &[(String, Vec<String>)]) -> String {
    let mut widths: Vec<usize> = std::iter::once(title.len()).chain(header.iter().map(|h| h.len())).collect();
    for (name, cells) in rows {
        widths[0] = widths[0].max(name.len());
        for (w, c) in widths[1..].iter_mut().zip(cells) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, first: &str, rest: &[String]| {
        let _ = write!(out, "{first:<w$}", w = widths[0]);
        for (c, w) in rest.iter().zip(&widths[1..]) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    };
    let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    line(&mut out, title, &header);
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for (name, cells) in rows {
        line(&mut out, name, cells);
    }
    out
}

impl BenchReport {
    pub fn any_diverged(&self) -> bool {
        self.observers.iter().any(|r| r.diverged)
    }

    pub fn row(&self, kind: ObserverKind) -> Option<&ObserverRow> {
        self.observers.iter().find(|r| r.observer == kind)
    }

    pub fn controller(&self, kind: ControllerKind) -> Option<&ControllerRow> {
        self.controllers.iter().find(|r| r.controller == kind)
    }

    pub fn observers_csv(&self) -> String {
        let mut out = csv_line(std::iter::once("Observer".to_string()).chain(OBSERVER_COLUMNS.iter().map(|s| s.to_string())));
        for row in &self.observers {
            out.push_str(&csv_line(std::iter::once(row.observer.label().to_string()).chain(row.cells())));
        }
        out
    }

    pub fn controllers_csv(&self) -> String {
        let mut out = csv_line(std::iter::once("Controller".to_string()).chain(CONTROLLER_COLUMNS.iter().map(|s| s.to_string())));
        for row in &self.controllers {
            out.push_str(&csv_line(std::iter::once(row.controller.label().to_string()).chain(row.cells())));
        }
        out
    }

    /// Aligned plain-text rendering of whichever sections are populated.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if !self.observers.is_empty() {
            let rows: Vec<_> = self.observers.iter().map(|r| (r.observer.label().to_string(), r.cells())).collect();
            out.push_str(&table("Observer", &OBSERVER_COLUMNS, &rows));
        }
        if !self.controllers.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            let rows: Vec<_> = self.controllers.iter().map(|r| (r.controller.label().to_string(), r.cells())).collect();
            out.push_str(&table("Controller", &CONTROLLER_COLUMNS, &rows));
        }
        out
    }
}
