use backlash_core::experiment::{
    analyze, identify_experiment, preset, reproduce_table2, simulate_experiment, write_run, ControllerConfig,
    ExperimentConfig, Outcome, Overrides,
};

#[test]
fn analyze_case1_satisfies_conditions() {
    let report = analyze(&preset("paper-case1").unwrap()).unwrap();
    let pred = report.predictions.as_ref().unwrap();
    assert!(pred.conditions.all);
    assert!(pred.amplitude.is_some() && pred.half_period.is_some());
    assert_eq!(pred.drift.len(), 2);
    assert!(report.simulation.is_none());
    assert_eq!(report.outcome, Outcome::Success);
}

#[test]
fn analyze_flags_amplitude_at_friction_level() {
    let mut cfg = preset("steady-cycle").unwrap();
    let ControllerConfig::Relay(r) = &mut cfg.controller else {
        unreachable!()
    };
    r.h0 = cfg.plant.motor_coulomb;
    let report = analyze(&cfg).unwrap();
    let c = &report.predictions.as_ref().unwrap().conditions;
    assert!(!c.drive_above_friction && !c.all);
    assert_eq!(report.outcome, Outcome::ChecksFailed);
    assert!(report.to_text().contains("h>f NO"));
}

#[test]
fn artifacts_have_fixed_headers() {
    let mut cfg = preset("paper-case3").unwrap();
    cfg.sim.duration = 0.2;
    let run = simulate_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), &run).unwrap();
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("t,x_m,v_m,x_L,v_L,u,tau,mode"));
    assert_eq!(traj.lines().count(), run.trajectory.len() + 1);
    let events = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert_eq!(events.lines().next(), Some("t,kind,payload"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["name"], "paper-case3");
    assert!(json["pi_gains"]["kp"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_to_string(dir.path().join("report.txt"))
        .unwrap()
        .contains("## simulation"));
}

#[test]
fn rigid_coupling_fails_cleanly() {
    let mut cfg = preset("paper-case1").unwrap();
    cfg.apply(&Overrides {
        beta: Some(0.0),
        ..Default::default()
    });
    cfg.sim.duration = 20.0;
    let run = identify_experiment(&cfg).unwrap();
    assert_eq!(run.report.outcome, Outcome::EstimationFailed);
    let id = run.report.identification.unwrap();
    assert!(id.estimate.is_none());
    assert!(id.failure_diagnostics.iter().any(|d| d.contains("no change point")));
}

#[test]
fn identify_requires_a_method() {
    let cfg = preset("steady-cycle").unwrap();
    assert!(identify_experiment(&cfg).is_err());
}

#[test]
fn table_tracks_overridden_gap_and_is_repeatable() {
    let cases: Vec<ExperimentConfig> = ["paper-case1", "paper-case2"]
        .iter()
        .map(|n| preset(n).unwrap())
        .collect();
    let o = Overrides {
        beta: Some(0.005),
        ..Default::default()
    };
    let (a, _) = reproduce_table2(&cases, &o, None).unwrap();
    let (b, _) = reproduce_table2(&cases, &o, None).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    for (row, tol) in a.rows.iter().zip([0.10, 0.15]) {
        assert_eq!(row.nominal_2beta, 0.01);
        assert!(
            row.relative_error.unwrap().abs() <= tol,
            "{}: {:?}",
            row.case,
            row.relative_error
        );
    }
}

#[test]
fn invalid_override_is_caught_before_running() {
    let cases = vec![preset("paper-case1").unwrap()];
    let o = Overrides {
        beta: Some(-1.0),
        ..Default::default()
    };
    assert!(reproduce_table2(&cases, &o, None).is_err());
}
