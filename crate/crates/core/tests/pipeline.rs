use hbf_core::array::{ArrayGeometry, CouplingModel, ElementPattern, FrequencyGrid};
use hbf_core::channel::{draw_paths, read_channel, strong_los_paths, write_channel, ChannelConfig, ChannelSynthesizer};
use hbf_core::rng::{stream, Domain};
use hbf_core::scalar::frob_sqr;
use hbf_core::sim::{evaluate_channel_tensor, run_montecarlo, write_rate_report_csv, Scenario};
use hbf_core::{ChannelTensor, Error, RunConfig, ScenarioMode};

fn base() -> RunConfig {
    RunConfig {
        config_id: "pipeline".into(),
        num_subcarriers: 64,
        pilot_subcarriers: 8,
        snr_db: vec![0.0, 15.0, 30.0],
        realizations: 40,
        rate_realizations: 10,
        ..RunConfig::default()
    }
}

fn los_tensor(c: &RunConfig, secondary: usize) -> ChannelTensor<f64> {
    let grid = FrequencyGrid::new(c.center_frequency_hz, c.subcarrier_spacing_hz, c.num_subcarriers).unwrap();
    let ap = ArrayGeometry::half_wavelength(c.m_ap, c.reference_frequency_hz).unwrap();
    let sta = ArrayGeometry::half_wavelength(c.m_ue, c.reference_frequency_hz).unwrap();
    let cp = CouplingModel::from_db(-20.0).unwrap();
    let synth = ChannelSynthesizer::new(ap, sta, ElementPattern::default(), &cp, &cp, grid.frequencies()).unwrap();
    let paths = strong_los_paths::<f64, _>(&mut stream(5, Domain::Channel, &[], 0), c.users, c.m_ap, c.m_ue, secondary, -20.0).unwrap();
    let per_user = paths.iter().map(|p| synth.matrices(p).unwrap()).collect();
    ChannelTensor::new(c.num_subcarriers, (1..=c.num_subcarriers).collect(), per_user).unwrap()
}

#[test]
fn single_user_file_rate_equals_sum() {
    let c = RunConfig { realizations: 20, ..base() };
    let tensor = los_tensor(&c, 1);
    let mut buf = Vec::new();
    write_channel(&tensor, &mut buf).unwrap();
    let loaded: ChannelTensor<f64> = read_channel(buf.as_slice()).unwrap();
    assert_eq!(loaded, tensor);
    let scn = Scenario::<f64>::from_config(&c).unwrap();
    let report = evaluate_channel_tensor(&scn, &loaded).unwrap();
    for p in &report.points {
        assert_eq!(p.hybrid_per_user.len(), 1);
        assert_eq!(p.hybrid_per_user[0], p.sum_rate_hybrid());
        assert!(p.sum_rate_hybrid() > 0.0);
        assert!(p.sum_rate_hybrid() <= p.sum_rate_digital_bd() + 1e-9);
    }
    let mut csv = Vec::new();
    write_rate_report_csv("x", &report.points, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * c.snr_db.len());
}

#[test]
fn strong_los_file_is_error_free() {
    let c = RunConfig { users: 4, realizations: 50, snr_db: vec![10.0, 30.0], ..base() };
    let scn = Scenario::<f64>::from_config(&c).unwrap();
    let report = evaluate_channel_tensor(&scn, &los_tensor(&c, 1)).unwrap();
    for p in &report.points {
        assert_eq!(p.bser, 0.0, "{p:?}");
        assert_eq!(p.rate_count, 50);
    }
}

#[test]
fn file_dimensions_must_match_config() {
    let c = base();
    let tensor = los_tensor(&RunConfig { users: 2, ..c.clone() }, 0);
    let scn = Scenario::<f64>::from_config(&c).unwrap();
    assert!(matches!(evaluate_channel_tensor(&scn, &tensor), Err(Error::Format { .. })));
}

#[test]
fn duplicate_beams_are_counted_as_excluded() {
    let c = RunConfig { users: 4, realizations: 30, rate_realizations: 30, snr_db: vec![20.0], ..base() };
    let pts = run_montecarlo(&Scenario::<f64>::from_config(&c).unwrap()).unwrap().points;
    let p = &pts[0];
    assert_eq!(p.rate_count + p.excluded_count, 30);
    assert!(p.excluded_count > 0, "four users on sixteen beams should collide sometimes");
    assert!(p.rate_count > 0);
}

#[test]
fn loss_follows_bser_across_snr() {
    let c = RunConfig {
        realizations: 1000,
        rate_realizations: 0,
        snr_db: vec![-10.0, 0.0, 10.0, 20.0, 30.0],
        ..RunConfig::default()
    };
    let mut pts = run_montecarlo(&Scenario::<f64>::from_config(&c).unwrap()).unwrap().points;
    pts.sort_by(|a, b| a.bser.total_cmp(&b.bser));
    for w in pts.windows(2) {
        assert!(w[1].loss_db >= 0.95 * w[0].loss_db, "{w:?}");
    }
    assert!(pts.iter().all(|p| p.loss_db >= 0.0));
}

#[test]
fn scenario_modes_run_and_count_transmissions() {
    let single_user = RunConfig { mode: ScenarioMode::SingleUserExhaustiveSta, ..base() };
    let pts = run_montecarlo(&Scenario::<f64>::from_config(&single_user).unwrap()).unwrap().points;
    assert_eq!(pts[0].training_count, 4 * 16 + 16);

    let single_antenna = RunConfig {
        mode: ScenarioMode::SingleAntennaSta,
        m_ue: 1,
        m_sub: 1,
        users: 3,
        ..base()
    };
    let pts = run_montecarlo(&Scenario::<f64>::from_config(&single_antenna).unwrap()).unwrap().points;
    assert_eq!(pts[0].training_count, 3 * 4);
    assert!(pts.iter().all(|p| p.sum_rate_hybrid().is_finite()));
}

#[test]
fn invalid_subarray_ratio_is_a_config_error() {
    let c = RunConfig { m_sub: 6, ..base() };
    match Scenario::<f64>::from_config(&c) {
        Err(Error::Config(d)) => assert!(d.iter().any(|m| m.contains("even integer")), "{d:?}"),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn uncoupled_channel_power_is_unbiased() {
    // E‖H‖² = M_ap M_ue E|α|² E[F²]², with E[F²] from quadrature
    let m = 8;
    let pattern = ElementPattern::default();
    let n_q = 10_000;
    let h = std::f64::consts::PI / n_q as f64;
    let e_f2 = (0..n_q).map(|i| pattern.gain((i as f64 + 0.5) * h).powi(2)).sum::<f64>() / n_q as f64;
    let ap = ArrayGeometry::half_wavelength(m, 60e9).unwrap();
    let none = CouplingModel::none();
    let synth = ChannelSynthesizer::new(ap, ap, pattern, &none, &none, vec![58e9]).unwrap();
    let cfg = ChannelConfig { coupling: none, ..ChannelConfig::single_path() };
    let n = 1_000_000;
    let sum: f64 = (0..n)
        .map(|r| frob_sqr(&synth.matrix(&draw_paths(&mut stream(3, Domain::Channel, &[], r), &cfg).unwrap(), 0).unwrap()))
        .sum();
    let oracle = (m * m) as f64 * e_f2 * e_f2;
    let rel = (sum / n as f64 / oracle - 1.0).abs();
    // estimator std is about 0.19% at this sample size
    assert!(rel < 0.01, "relative error {rel}");
}

#[test]
fn f32_scenario_agrees_with_f64() {
    let c = RunConfig { realizations: 5, rate_realizations: 0, snr_db: vec![30.0], ..base() };
    let a = run_montecarlo(&Scenario::<f64>::from_config(&c).unwrap()).unwrap().points;
    let b = run_montecarlo(&Scenario::<f32>::from_config(&c).unwrap()).unwrap().points;
    assert_eq!(a[0].realizations, b[0].realizations);
    assert!((a[0].bser - b[0].bser).abs() <= 0.4);
    assert_eq!(a[0].training_count, b[0].training_count);
}
