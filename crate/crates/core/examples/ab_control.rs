//! Admittance control versus operational-space control after collisions, both
//! driven by the in-loop IMM detector.

use contact_imm::bench::{run_ab, BenchConfig, BenchReport};
use contact_imm::dynamics::LegModel;
use contact_imm::observer::EstimatorConfig;
use contact_imm::sim::ControllerKind;

fn main() -> contact_imm::Result<()> {
    let bench = BenchConfig {
        mass_scale: 1.0,
        ..BenchConfig::default()
    };
    let controllers = run_ab(&bench.batch(0), &LegModel::default(), &EstimatorConfig::default(), &[ControllerKind::Ac, ControllerKind::Osc])?;
    let report = BenchReport {
        observers: Vec::new(),
        controllers,
    };
    print!("{}", report.to_table());
    Ok(())
}
