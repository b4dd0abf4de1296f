//! Runs the IMM estimator on a simulated collision and prints the mode
//! probabilities around the impact.

use contact_imm::dynamics::LegModel;
use contact_imm::imm::ImmEstimator;
use contact_imm::metrics::episodes;
use contact_imm::observer::EstimatorConfig;
use contact_imm::observers::ContactMode;
use contact_imm::sim::{simulate, Scenario};

fn main() -> contact_imm::Result<()> {
    let model = LegModel::default();
    let scenario = Scenario::single_collision(0.25, 1);
    let trace = simulate(&scenario, &model)?;
    let cfg = EstimatorConfig::default();
    let mut imm = ImmEstimator::new(model, cfg.noise, cfg.cones, cfg.imm, cfg.dt)?;
    let out: Vec<_> = trace.readings().map(|r| imm.step(r)).collect::<Result<_, _>>()?;

    let modes = trace.modes();
    let hit = episodes(&modes, ContactMode::Collision)[0];
    println!("   t (s)   truth      estimate   mu_swing mu_stance mu_coll   |f_hat| (N)");
    for i in (hit.start.saturating_sub(5)..(hit.end + 20).min(out.len())).step_by(3) {
        let o = &out[i];
        println!(
            "{:8.3}   {:<9}  {:<9}  {:8.3} {:9.3} {:7.3}   {:8.2}",
            o.t,
            format!("{:?}", modes[i]),
            format!("{:?}", o.mode),
            o.mu[0],
            o.mu[1],
            o.mu[2],
            o.f_ext_hat.norm()
        );
    }
    Ok(())
}
