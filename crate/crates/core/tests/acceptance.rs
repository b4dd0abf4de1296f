//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use contact_imm::bench::{run_ab, run_benchmark, BenchConfig};
use contact_imm::cli::{cmd_bench, BenchArgs, CommonArgs};
use contact_imm::dynamics::{contact_jacobian, dynamics_terms, mass_matrix, JointReading, LegModel};
use contact_imm::imm::{imm_step, ImmSettings, ImmState};
use contact_imm::metrics::{abs_error_pct, episodes};
use contact_imm::observer::{EstimatorConfig, ObserverKind};
use contact_imm::observers::{
    build_process_model, kf_predict, kf_update, mode_measurement, pseudo_wrench, ContactMode, KfState, LegSignals,
    ProcessModel,
};
use contact_imm::sim::{simulate, ControllerKind, Scenario};
use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

fn random_spd(rng: &mut ChaCha8Rng, diag: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let s = DMatrix::from_diagonal(&DVector::from_iterator(n, diag.iter().map(|d| d.sqrt())));
    &s * (&a * a.transpose() + DMatrix::identity(n, n)) * &s
}

fn kf_vs_conjugate_posterior() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 4;
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let p0 = random_spd(&mut rng, &[2.0; 4]);
    let r = random_spd(&mut rng, &[0.5; 3]);
    let static_model = ProcessModel {
        a: DMatrix::identity(n, n),
        b: DMatrix::zeros(n, 1),
        q: DMatrix::zeros(n, n),
    };
    let r_inv = r.clone().try_inverse().unwrap();
    let mut kf = KfState::new(x0.clone(), p0.clone());
    let mut info = p0.clone().try_inverse().unwrap();
    let mut info_mean = &info * &x0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let c = DMatrix::from_fn(3, n, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0));
        let prior = kf_predict(&kf, &static_model, &DVector::zeros(1));
        kf = kf_update(&prior, &c, &r, &y).unwrap().state;
        info += c.transpose() * &r_inv * &c;
        info_mean += c.transpose() * &r_inv * &y;
        let cov = info.clone().try_inverse().unwrap();
        let mean = &cov * &info_mean;
        worst = worst.max((&kf.x - &mean).amax()).max((&kf.p - &cov).amax());
    }
    let elapsed = start.elapsed();
    verdict(worst < 1e-9 && elapsed < Duration::from_secs(1), format!("max |Δ| = {worst:.2e}, {elapsed:.2?}"))
}

/// Textbook IMM cycle written with explicit inverses and loops.
#[allow(clippy::too_many_arguments)]
fn naive_imm(
    filters: &[KfState],
    mu: &[f64; 3],
    pi: &DMatrix<f64>,
    floor: f64,
    models: &[ProcessModel],
    u: &DVector<f64>,
    ys: &[DVector<f64>],
    rs: &[DMatrix<f64>],
) -> (Vec<KfState>, Vec<f64>, KfState) {
    let dim = filters[0].x.len();
    let mut m: Vec<f64> = mu.iter().map(|v| v.max(floor)).collect();
    let total: f64 = m.iter().sum();
    m.iter_mut().for_each(|v| *v /= total);

    let mut c = [0.0; 3];
    let mut out = Vec::new();
    let mut log_l = [0.0; 3];
    for k in 0..3 {
        for j in 0..3 {
            c[k] += pi[(j, k)] * m[j];
        }
        let mut x = DVector::zeros(dim);
        for j in 0..3 {
            x += &filters[j].x * (pi[(j, k)] * m[j] / c[k]);
        }
        let mut p = DMatrix::zeros(dim, dim);
        for j in 0..3 {
            let d = &filters[j].x - &x;
            p += (&filters[j].p + &d * d.transpose()) * (pi[(j, k)] * m[j] / c[k]);
        }
        let xp = &models[k].a * &x + &models[k].b * u;
        let pp = &models[k].a * &p * models[k].a.transpose() + &models[k].q;
        let s = &pp + &rs[k];
        let s_inv = s.clone().try_inverse().unwrap();
        let gain = &pp * &s_inv;
        let nu = &ys[k] - &xp;
        let i_k = DMatrix::identity(dim, dim) - &gain;
        let x_post = &xp + &gain * &nu;
        let p_post = &i_k * &pp * i_k.transpose() + &gain * &rs[k] * gain.transpose();
        log_l[k] = -0.5 * ((nu.transpose() * &s_inv * &nu)[0] + s.determinant().ln() + dim as f64 * (2.0 * std::f64::consts::PI).ln());
        out.push(KfState::new(x_post, p_post));
    }
    let top = (0..3).map(|k| c[k].ln() + log_l[k]).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = (0..3).map(|k| (c[k].ln() + log_l[k] - top).exp()).collect();
    let wsum: f64 = w.iter().sum();
    let mu_post: Vec<f64> = w.iter().map(|v| v / wsum).collect();
    let mut x = DVector::zeros(dim);
    for k in 0..3 {
        x += &out[k].x * mu_post[k];
    }
    let mut p = DMatrix::zeros(dim, dim);
    for k in 0..3 {
        let d = &out[k].x - &x;
        p += (&out[k].p + &d * d.transpose()) * mu_post[k];
    }
    (out, mu_post, KfState::new(x, p))
}

fn random_reading(rng: &mut ChaCha8Rng, t: f64) -> JointReading {
    JointReading {
        t,
        q: vec![rng.gen_range(-0.3..0.3), rng.gen_range(0.4..1.1), rng.gen_range(-2.0..-0.9)],
        qd: (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        tau_m: (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect(),
    }
}

fn imm_step_vs_naive() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = LegModel::default();
    let cfg = EstimatorConfig::default();
    let settings = ImmSettings::default();
    let dt = cfg.dt;
    let r0 = random_reading(&mut rng, 0.0);
    let r1 = random_reading(&mut rng, dt);
    let (mut state, _, _) = imm_step(&ImmState::new(3, &settings).unwrap(), &r0, &model, &cfg.noise, &cfg.cones, &settings, dt).unwrap();
    let diag = [0.02, 0.02, 0.02, 50.0, 50.0, 50.0];
    for f in state.filters.iter_mut() {
        *f = KfState::new(
            DVector::from_fn(6, |i, _| if i < 3 { rng.gen_range(-0.5..0.5) } else { rng.gen_range(-30.0..30.0) }),
            random_spd(&mut rng, &diag),
        );
    }
    let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    state.belief.mu = [raw[0] / sum, raw[1] / sum, raw[2] / sum];

    let (next, _, _) = imm_step(&state, &r1, &model, &cfg.noise, &cfg.cones, &settings, dt).unwrap();

    let prev = LegSignals::compute(&model, &r0).unwrap();
    let sig = LegSignals::compute(&model, &r1).unwrap();
    let mut models = Vec::new();
    let mut ys = Vec::new();
    let mut rs = Vec::new();
    for mode in ContactMode::ALL {
        models.push(build_process_model(mode, &prev.jac, &cfg.noise, dt));
        let (y_f, r_f) = mode_measurement(mode, &sig.pseudo.force, &cfg.cones, &cfg.noise);
        let mut y = DVector::zeros(6);
        y.rows_mut(0, 3).copy_from(&sig.momentum);
        y.rows_mut(3, 3).copy_from(&y_f);
        let mut r = DMatrix::from_diagonal_element(6, 6, cfg.noise.v_p);
        r.view_mut((3, 3), (3, 3)).copy_from(&r_f);
        ys.push(y);
        rs.push(r);
    }
    let (filters, mu, combined) = naive_imm(&state.filters, &state.belief.mu, &settings.tpm.matrix(), settings.mu_floor, &models, &prev.input, &ys, &rs);

    let mut worst: f64 = 0.0;
    for k in 0..3 {
        worst = worst.max((next.belief.mu[k] - mu[k]).abs());
        worst = worst.max(max_rel_diff(&DMatrix::from_column_slice(6, 1, next.filters[k].x.as_slice()), &DMatrix::from_column_slice(6, 1, filters[k].x.as_slice())));
        worst = worst.max(max_rel_diff(&next.filters[k].p, &filters[k].p));
    }
    worst = worst.max(max_rel_diff(&DMatrix::from_column_slice(6, 1, next.combined.x.as_slice()), &DMatrix::from_column_slice(6, 1, combined.x.as_slice())));
    worst = worst.max(max_rel_diff(&next.combined.p, &combined.p));
    verdict(worst <= 1e-12, format!("max relative |Δ| = {worst:.2e}"))
}

fn dynamics_identities() -> Verdict {
    let model = LegModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eps = 1e-6;
    let (mut skew, mut min_eig, mut recovery): (f64, f64, f64) = (0.0, f64::INFINITY, 0.0);
    for _ in 0..1000 {
        let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let qd: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let terms = dynamics_terms(&model, &q, &qd).unwrap();
        let plus: Vec<f64> = q.iter().zip(&qd).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = q.iter().zip(&qd).map(|(a, b)| a - eps * b).collect();
        let mdot = (mass_matrix(&model, &plus) - mass_matrix(&model, &minus)) / (2.0 * eps);
        skew = skew.max((mdot - &terms.coriolis - terms.coriolis.transpose()).norm());
        min_eig = min_eig.min(terms.mass.clone().symmetric_eigenvalues().min());

        let q_stance = [rng.gen_range(-0.4..0.4), rng.gen_range(0.2..1.2), rng.gen_range(-2.2..-0.6)];
        let stance = dynamics_terms(&model, &q_stance, &[0.0; 3]).unwrap();
        let (jac, _) = contact_jacobian(&model, &q_stance).unwrap();
        let f0 = Vector3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let tau = -(jac.transpose() * f0);
        let got = pseudo_wrench(&stance.mass, &jac, &Matrix3xX::zeros(3), &DVector::zeros(3), &tau).unwrap();
        recovery = recovery.max((got.force - f0).norm());
    }
    verdict(
        skew < 1e-5 && min_eig > 0.0 && recovery < 1e-9,
        format!("skew {skew:.2e}, min eig(M) {min_eig:.3e}, recovery {recovery:.2e}"),
    )
}

fn mismatch_benchmark() -> Verdict {
    let bench = BenchConfig::default();
    let start = Instant::now();
    let report = run_benchmark(&ObserverKind::ALL, &bench.batch(0), &LegModel::default(), &EstimatorConfig::default(), &bench).unwrap();
    let elapsed = start.elapsed();
    let row = |k| report.row(k).unwrap();
    let imm = row(ObserverKind::ImmMbko);
    let fo = row(ObserverKind::FoMbo);
    let mbko = row(ObserverKind::Mbko);
    let pm = row(ObserverKind::PmMbko);
    let lt = |a: Option<f64>, b: Option<f64>| matches!((a, b), (Some(a), Some(b)) if a < b);
    let checks = [
        ("a", [fo, mbko, pm].iter().all(|b| imm.success >= b.success) && !report.any_diverged()),
        ("b", imm.false_positive < fo.false_positive),
        ("c", lt(imm.swing_rmse_n, mbko.swing_rmse_n)),
        ("d", lt(imm.post_collision_rmse_n, pm.post_collision_rmse_n)),
        ("time", elapsed < Duration::from_secs(120)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!(
            "success {}/{} (FO {}, MBKO {}, PM {}); FP {} vs FO {}; swing {:.2} vs MBKO {:.2} N; post {:.2} vs PM {:.2} N; {elapsed:.1?}{}",
            imm.success,
            imm.total,
            fo.success,
            mbko.success,
            pm.success,
            imm.false_positive,
            fo.false_positive,
            imm.swing_rmse_n.unwrap_or(f64::NAN),
            mbko.swing_rmse_n.unwrap_or(f64::NAN),
            imm.post_collision_rmse_n.unwrap_or(f64::NAN),
            pm.post_collision_rmse_n.unwrap_or(f64::NAN),
            if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
        ),
    )
}

fn nominal() -> BenchConfig {
    BenchConfig {
        mass_scale: 1.0,
        ..BenchConfig::default()
    }
}

fn nominal_delay() -> Verdict {
    let bench = nominal();
    let report = run_benchmark(&[ObserverKind::ImmMbko], &bench.batch(0), &LegModel::default(), &EstimatorConfig::default(), &bench).unwrap();
    let row = report.row(ObserverKind::ImmMbko).unwrap();
    match row.mean_delay_ms {
        Some(d) => verdict(d <= 30.0 && row.success == row.total, format!("mean delay {d:.2} ms, {}/{} detected", row.success, row.total)),
        None => verdict(false, "no detections"),
    }
}

fn collision_probability_timing() -> Verdict {
    let model = LegModel::default();
    let cfg = EstimatorConfig::default();
    let (mut ok, mut total) = (0, 0);
    let mut worst_rise = 0;
    let mut worst_fall = 0;
    for sc in nominal().batch(0) {
        let trace = simulate(&sc, &model).unwrap();
        let mut obs = cfg.build(ObserverKind::ImmMbko, &sc.estimator_model(&model)).unwrap();
        let mu: Vec<f64> = trace.readings().map(|r| obs.observe(r).unwrap().mu.unwrap()[2]).collect();
        let ticks = |s: f64| (s / sc.dt).round() as usize;
        for ep in episodes(&trace.modes(), ContactMode::Collision) {
            total += 1;
            let before = ep.start > 0 && mu[ep.start - 1] < 0.1;
            let rise = (ep.start..(ep.start + ticks(0.03) + 1).min(mu.len())).find(|&i| mu[i] > 0.9).map(|i| i - ep.start);
            let fall = (ep.end..(ep.end + ticks(0.1) + 1).min(mu.len())).find(|&i| mu[i] < 0.1).map(|i| i - ep.end);
            worst_rise = worst_rise.max(rise.unwrap_or(usize::MAX));
            worst_fall = worst_fall.max(fall.unwrap_or(usize::MAX));
            ok += (before && rise.is_some() && fall.is_some()) as usize;
        }
    }
    let show = |v: usize| if v == usize::MAX { "none".to_string() } else { format!("{v} ms") };
    verdict(
        total > 0 && ok == total,
        format!("{ok}/{total} episodes; slowest rise {}, slowest fall {}", show(worst_rise), show(worst_fall)),
    )
}

fn controller_ab() -> Verdict {
    let rows = run_ab(&nominal().batch(0), &LegModel::default(), &EstimatorConfig::default(), &[ControllerKind::Ac, ControllerKind::Osc]).unwrap();
    let (ac, osc) = (&rows[0], &rows[1]);
    verdict(
        ac.avg_impulse_ns < osc.avg_impulse_ns && ac.avg_duration_s < osc.avg_duration_s,
        format!(
            "impulse {:.4} vs {:.4} N·s, duration {:.4} vs {:.4} s",
            ac.avg_impulse_ns, osc.avg_impulse_ns, ac.avg_duration_s, osc.avg_duration_s
        ),
    )
}

fn force_error_metric() -> Verdict {
    let truth = Vector3::new(3.0, -4.0, 12.0);
    let cases = [(truth, 0.0), (truth * 0.5, 50.0), (Vector3::zeros(), 100.0), (truth * 2.0, 100.0)];
    let worst = cases.iter().map(|(f, e)| (abs_error_pct(f, &truth).unwrap() - e).abs()).fold(0.0, f64::max);
    verdict(worst <= 1e-12, format!("max |Δ| = {worst:.1e} %"))
}

fn imm_runtime_and_soak() -> Verdict {
    let model = LegModel::default();
    let cfg = EstimatorConfig::default();
    let settings = ImmSettings::default();
    let trace = simulate(&Scenario::collision_course(5, 11), &model).unwrap();
    let readings: Vec<&JointReading> = trace.readings().collect();
    let step = |state: &ImmState, r: &JointReading| imm_step(state, r, &model, &cfg.noise, &cfg.cones, &settings, cfg.dt).unwrap();

    let mut state = ImmState::new(3, &settings).unwrap();
    let mut times = Vec::with_capacity(2000);
    for r in readings.iter().take(2000) {
        let t = Instant::now();
        let (next, _, _) = step(&state, r);
        times.push(t.elapsed());
        state = next;
    }
    times.sort();
    let median = times[times.len() / 2];

    let mut state = ImmState::new(3, &settings).unwrap();
    let mut violations = 0;
    for i in 0..100_000 {
        let (next, _, reset) = step(&state, readings[i % readings.len()]);
        let mu_ok = next.belief.mu.iter().all(|m| (0.0..=1.0).contains(m)) && (next.belief.mu.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        let cov_ok = next.filters.iter().chain(std::iter::once(&next.combined)).all(|f| {
            let p = &f.p;
            p.iter().all(|v| v.is_finite()) && p == &p.transpose() && p.clone().symmetric_eigenvalues().min() >= -1e-9 * p.amax()
        });
        if !(mu_ok && cov_ok) || reset.iter().any(|&r| r) {
            violations += 1;
        }
        state = next;
    }
    verdict(
        median <= Duration::from_micros(100) && violations == 0,
        format!("median {median:.1?}, {violations} violations in 100000 steps"),
    )
}

fn bench_is_reproducible() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let args = BenchArgs {
            common: CommonArgs {
                scenario: None,
                model: None,
                estimator_config: None,
                out: dir.path().to_path_buf(),
                seed: Some(0),
            },
            observers: "all".into(),
            bench_config: None,
        };
        cmd_bench(&args).unwrap();
    }
    let mut differing = Vec::new();
    for name in ["bench_observers.csv", "bench_report.txt", "bench.meta.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        if a != b {
            differing.push(name);
        }
    }
    verdict(differing.is_empty(), if differing.is_empty() { "3 files identical".to_string() } else { format!("differ: {differing:?}") })
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 KF equals conjugate Gaussian posterior", kf_vs_conjugate_posterior),
        ("2 imm_step equals naive cycle", imm_step_vs_naive),
        ("3 dynamics identities", dynamics_identities),
        ("4 mismatch benchmark ordering", mismatch_benchmark),
        ("5 nominal IMM delay <= 30 ms", nominal_delay),
        ("6 collision probability timing", collision_probability_timing),
        ("7 admittance beats OSC", controller_ab),
        ("8 force error metric", force_error_metric),
        ("9 imm_step runtime and soak", imm_runtime_and_soak),
        ("10 bench reproducibility", bench_is_reproducible),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let v = check();
        failures += !v.pass as usize;
        println!("{} criterion {name}: {} ({:.1?})", if v.pass { "PASS" } else { "FAIL" }, v.detail, start.elapsed());
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
