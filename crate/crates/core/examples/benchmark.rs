//! The full observer benchmark: ten scenarios with five collisions each.

use contact_imm::bench::{run_benchmark, BenchConfig};
use contact_imm::dynamics::LegModel;
use contact_imm::observer::{EstimatorConfig, ObserverKind};

fn main() -> contact_imm::Result<()> {
    let bench = BenchConfig::default();
    let report = run_benchmark(&ObserverKind::ALL, &bench.batch(0), &LegModel::default(), &EstimatorConfig::default(), &bench)?;
    print!("{}", report.to_table());
    Ok(())
}
