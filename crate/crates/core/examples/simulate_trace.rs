//! Simulates a walking leg that trips over three obstacles and writes the trace.

use contact_imm::dynamics::LegModel;
use contact_imm::metrics::{episodes, impulse_and_duration};
use contact_imm::observers::ContactMode;
use contact_imm::sim::{simulate, Scenario};

fn main() -> contact_imm::Result<()> {
    let scenario = Scenario::collision_course(3, 42);
    let trace = simulate(&scenario, &LegModel::default())?;
    let modes = trace.modes();
    let stats = impulse_and_duration(&trace.forces(), &modes, scenario.dt);
    println!(
        "{} ticks, {} stance phases, {} collisions (avg {:.1} ms, {:.3} N·s)",
        trace.records.len(),
        episodes(&modes, ContactMode::Stance).len(),
        stats.count,
        stats.avg_duration * 1e3,
        stats.avg_impulse
    );
    let path = std::env::temp_dir().join("contact_imm_trace.csv");
    trace.write_csv(std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
