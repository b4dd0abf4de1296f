//! Compares the four observers on one trace with a 10 % heavier estimator model.

use contact_imm::dynamics::LegModel;
use contact_imm::metrics::{episodes, force_abs_error, match_detections, phase_rmse};
use contact_imm::observer::{EstimatorConfig, ObserverKind};
use contact_imm::observers::ContactMode;
use contact_imm::sim::{simulate, Scenario};

fn main() -> contact_imm::Result<()> {
    let model = LegModel::default();
    let mut scenario = Scenario::collision_course(4, 3);
    scenario.model_mismatch.mass_scale = 1.1;
    let trace = simulate(&scenario, &model)?;
    let (truth, forces) = (trace.modes(), trace.forces());
    let cfg = EstimatorConfig::default();

    for kind in ObserverKind::ALL {
        let mut obs = cfg.build(kind, &scenario.estimator_model(&model))?;
        let out: Vec<_> = trace.readings().map(|r| obs.observe(r)).collect::<Result<_, _>>()?;
        let modes: Vec<ContactMode> = out.iter().map(|o| o.mode).collect();
        let f_hat: Vec<_> = out.iter().map(|o| o.force).collect();
        let det = match_detections(&truth, &modes, scenario.dt, 0.01)?;
        let hits = episodes(&truth, ContactMode::Collision);
        let mut peak_err = 0.0;
        for ep in &hits {
            peak_err += force_abs_error(&f_hat[ep.start..ep.end], &forces[ep.start..ep.end])? / hits.len() as f64;
        }
        println!(
            "{:<9} detected {}/{}  false positives {:2}  peak error {:5.1} %  swing RMSE {:5.2} N",
            kind.label(),
            det.successes(),
            det.events.len(),
            det.false_positives,
            peak_err,
            phase_rmse(&f_hat, &forces, &truth, ContactMode::Swing).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
