use backlash_core::analytics;
use backlash_core::experiment::preset;
use backlash_core::sim::measure_cycles;
use backlash_core::{
    simulate, ContactMode, EventKind, PiTriangleController, PlantParams, RelayConfig, RelayController, SimConfig,
    SimState, Trajectory, TriangleRef,
};

fn plant(epsilon: f64) -> PlantParams {
    let mut p = PlantParams::table1();
    p.epsilon = epsilon;
    p
}

fn relay_run(p: &PlantParams, relay: RelayConfig, cfg: &SimConfig, init: SimState) -> Trajectory {
    simulate(p, &mut RelayController::new(relay), cfg, init).unwrap()
}

fn pi_run(p: &PlantParams, tri: TriangleRef, cfg: &SimConfig) -> Trajectory {
    let gains = backlash_core::pi_gains_from_bandwidth(p.lumped_inertia(), p.lumped_damping(), 5.0).unwrap();
    let mut ctl = PiTriangleController::new(gains, tri, cfg.sample_period);
    simulate(p, &mut ctl, cfg, SimState::default()).unwrap()
}

fn audit_impacts(p: &PlantParams, traj: &Trajectory) {
    let (m, big_m) = (p.motor_inertia, p.load_inertia);
    for r in &traj.impacts {
        let p0 = m * r.v_m_before + big_m * r.v_l_before;
        let p1 = m * r.v_m_after + big_m * r.v_l_after;
        let scale = m * r.v_m_before.abs() + big_m * r.v_l_before.abs();
        assert!((p1 - p0).abs() <= 1e-12 * scale, "momentum at t={}: {p0} -> {p1}", r.t);
        let k0 = m * r.v_m_before.powi(2) + big_m * r.v_l_before.powi(2);
        let k1 = m * r.v_m_after.powi(2) + big_m * r.v_l_after.powi(2);
        assert!(k1 <= k0 * (1.0 + 1e-12), "energy gain at t={}: {k0} -> {k1}", r.t);
    }
}

fn audit_modes(p: &PlantParams, cfg: &SimConfig, traj: &Trajectory) {
    let vmax = traj.v_m.iter().chain(&traj.v_l).fold(0.0f64, |a, v| a.max(v.abs()));
    let bound = cfg.event_tolerance() * vmax + 1e-12;
    for k in 0..traj.len() {
        let delta = traj.x_m[k] - traj.x_l[k];
        match traj.mode[k] {
            ContactMode::Gap => assert!(delta.abs() <= p.beta + bound, "k={k} δ={delta}"),
            mode => {
                assert!(
                    (delta - mode.side() * p.beta).abs() <= bound,
                    "k={k} δ={delta} {mode:?}"
                );
                assert!((traj.v_m[k] - traj.v_l[k]).abs() <= p.v_stick, "k={k}");
            }
        }
    }
}

#[test]
fn impacts_conserve_momentum_and_dissipate_across_restitution() {
    let cfg = SimConfig::new(4e-4, 10, 3.0);
    for eps in [0.0, 0.3, 0.7, 1.0] {
        let p = plant(eps);
        let relay = RelayConfig::alternating(0.1, 0.12, 2.0, 1.0);
        let traj = relay_run(&p, relay, &cfg, SimState::default());
        assert!(!traj.impacts.is_empty(), "ε={eps}: no impacts");
        audit_impacts(&p, &traj);
        audit_modes(&p, &cfg, &traj);

        let traj = pi_run(
            &p,
            TriangleRef {
                slope: 1400.0,
                period: 0.2,
            },
            &SimConfig::new(4e-4, 10, 0.6),
        );
        assert!(
            traj.impacts.len() >= 4,
            "ε={eps}: {} impacts under PI",
            traj.impacts.len()
        );
        audit_impacts(&p, &traj);
    }
}

#[test]
fn halving_dt_converges() {
    // Smooth reference through the gap and back: positions converge at
    // first order as the substep shrinks.
    let p = plant(0.0);
    let tri = TriangleRef {
        slope: 500.0,
        period: 0.4,
    };
    let runs: Vec<Trajectory> = [5, 10, 20, 40]
        .iter()
        .map(|&n| pi_run(&p, tri, &SimConfig::new(4e-4, n, 0.4)))
        .collect();
    let diff = |a: &Trajectory, b: &Trajectory| {
        a.x_m
            .iter()
            .zip(&b.x_m)
            .chain(a.x_l.iter().zip(&b.x_l))
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let d: Vec<f64> = runs.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    let peak = runs[3].x_m.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(d[2] < 1e-3 * peak, "finest change {} vs peak {peak}", d[2]);
    assert!(d[1] < d[0] && d[2] < d[1], "not converging: {d:?}");
}

#[test]
fn symmetric_relay_orbit_closes() {
    let cfg = preset("steady-cycle").unwrap();
    let relay = cfg.relay().unwrap().clone();
    let traj = relay_run(&cfg.plant, relay.clone(), &cfg.sim, SimState::default());
    let c = measure_cycles(&traj, 0.5).unwrap();
    let x_xi = analytics::limit_cycle_amplitude(&cfg.plant, relay.h0, relay.e).unwrap();
    assert!(
        c.drift_per_period.abs() <= 0.01 * x_xi,
        "drift {} vs X_ξ {x_xi}",
        c.drift_per_period
    );

    // No sample carries two switches.
    let mut last = None;
    for e in traj.events_of(EventKind::RelaySwitch) {
        let k = (e.t / cfg.sim.sample_period).round() as i64;
        assert_ne!(Some(k), last);
        last = Some(k);
    }
}

#[test]
fn drift_direction_follows_amplitude_asymmetry() {
    let p = plant(0.0).with_beta(f64::INFINITY);
    let cfg = SimConfig::new(1e-5, 100, 0.3);
    for (ap, am) in [(2.0, 1.0), (1.0, 2.0)] {
        let traj = relay_run(&p, RelayConfig::constant(0.1, 0.12, ap, am), &cfg, SimState::default());
        let c = measure_cycles(&traj, 0.1).unwrap();
        assert_eq!(
            c.drift_per_period.signum(),
            (ap - am).signum(),
            "α=({ap},{am}) drift {}",
            c.drift_per_period
        );
        let exact = analytics::exact_drift_per_period(&p, 0.12, 0.1, ap, am).unwrap();
        assert_eq!(exact.signum(), c.drift_per_period.signum());
    }
}

#[test]
fn rigid_coupling_moves_as_one_body() {
    let p = plant(0.0).with_beta(0.0);
    let cfg = SimConfig::new(4e-4, 10, 0.5);
    let traj = relay_run(
        &p,
        RelayConfig::alternating(0.1, 0.12, 2.0, 0.25),
        &cfg,
        SimState::default(),
    );
    assert!(traj.impacts.is_empty());
    for k in 0..traj.len() {
        assert!((traj.x_m[k] - traj.x_l[k]).abs() <= 1e-12);
        assert!(traj.mode[k].is_engaged());
    }
}
