use contact_imm::dynamics::LegModel;
use contact_imm::observer::{EstimatorConfig, ObserverKind};
use contact_imm::observers::ContactMode;
use contact_imm::sim::{simulate, Scenario, ScenarioTrace};

#[test]
fn free_swing_stays_in_swing_mode() {
    let model = LegModel::default();
    let mut sc = Scenario::walking(1.0, 2);
    sc.ground.stiffness = 0.0;
    sc.ground.damping = 0.0;
    let trace = simulate(&sc, &model).unwrap();
    assert!(trace.modes().iter().all(|&m| m == ContactMode::Swing));

    let mut imm = EstimatorConfig::default().build(ObserverKind::ImmMbko, &model).unwrap();
    let confident = trace
        .readings()
        .filter(|r| imm.observe(r).unwrap().mu.unwrap()[0] > 0.9)
        .count();
    assert!(confident as f64 > 0.95 * trace.records.len() as f64, "{confident} of {}", trace.records.len());
}

#[test]
fn stance_is_recognized_while_walking() {
    let model = LegModel::default();
    let trace = simulate(&Scenario::walking(1.2, 8), &model).unwrap();
    let mut imm = EstimatorConfig::default().build(ObserverKind::ImmMbko, &model).unwrap();
    let est: Vec<ContactMode> = trace.readings().map(|r| imm.observe(r).unwrap().mode).collect();
    let truth = trace.modes();
    let agree = est.iter().zip(&truth).filter(|(a, b)| a == b).count();
    assert!(agree as f64 > 0.9 * truth.len() as f64, "{agree} of {}", truth.len());
}

#[test]
fn trace_csv_round_trip_preserves_estimates() {
    let model = LegModel::default();
    let trace = simulate(&Scenario::collision_course(2, 5), &model).unwrap();
    let mut bytes = Vec::new();
    trace.write_csv(&mut bytes).unwrap();
    let back = ScenarioTrace::read_csv(bytes.as_slice()).unwrap();
    assert_eq!(back.records.len(), trace.records.len());

    let cfg = EstimatorConfig::default();
    let run = |t: &ScenarioTrace| {
        let mut obs = cfg.build(ObserverKind::ImmMbko, &model).unwrap();
        t.readings().map(|r| obs.observe(r).unwrap().force).collect::<Vec<_>>()
    };
    let (a, b) = (run(&trace), run(&back));
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}
