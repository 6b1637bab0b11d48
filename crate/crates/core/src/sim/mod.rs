//! Fixed-step, event-aware hybrid simulation of the two-mass system.
//!
//! Between events each body follows piecewise-affine dynamics integrated
//! with semi-implicit Euler on substeps of `dt`. Impacts, detachment and
//! velocity reversals are localized inside a substep by bisection down to
//! `event_tol`. The controller runs zero-order-hold at the sample period
//! on the (optionally delayed and quantized) motor velocity.

mod cycle;
mod impact;
mod trajectory;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use cycle::{measure_cycles, CycleStats};
pub use impact::post_impact_velocities;
pub use trajectory::{encoder_resolution, Event, EventKind, ImpactRecord, MotorTrace, Trajectory};

use crate::control::Controller;
use crate::error::{Error, Result};
use crate::model::{play_clamp, positive, ContactMode, PlantParams, SimState};

/// Bound on event resolutions within a single substep.
const MAX_EVENTS_PER_SUBSTEP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Controller sample period T_s (s).
    pub sample_period: f64,
    /// Integrator substep (s); must divide the sample period.
    pub dt: f64,
    /// Simulated time span (s).
    pub duration: f64,
    #[serde(default)]
    pub loop_delay_samples: usize,
    /// Encoder resolution in bits per revolution, if quantized.
    #[serde(default)]
    pub encoder_bits: Option<u32>,
    /// Event time-localization tolerance (s). Defaults to `dt * 1e-3`.
    #[serde(default)]
    pub event_tol: Option<f64>,
}

impl SimConfig {
    pub fn new(sample_period: f64, substeps: usize, duration: f64) -> Self {
        Self {
            sample_period,
            dt: sample_period / substeps as f64,
            duration,
            loop_delay_samples: 0,
            encoder_bits: None,
            event_tol: None,
        }
    }

    pub fn with_delay(mut self, samples: usize) -> Self {
        self.loop_delay_samples = samples;
        self
    }

    pub fn substeps(&self) -> usize {
        (self.sample_period / self.dt).round().max(1.0) as usize
    }

    pub fn event_tolerance(&self) -> f64 {
        self.event_tol.unwrap_or(self.dt * 1e-3)
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.sample_period).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        positive("sim.sample_period", self.sample_period)?;
        positive("sim.dt", self.dt)?;
        positive("sim.duration", self.duration)?;
        if self.dt > self.sample_period * (1.0 + 1e-12) {
            return Err(Error::invalid("sim.dt", "must not exceed sample_period"));
        }
        let ratio = self.sample_period / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(Error::invalid(
                "sim.dt",
                format!("sample_period / dt = {ratio} is not an integer"),
            ));
        }
        let tol = self.event_tolerance();
        if !(tol > 0.0 && tol < self.dt) {
            return Err(Error::invalid("sim.event_tol", "must satisfy 0 < event_tol < dt"));
        }
        if let Some(bits) = self.encoder_bits {
            if !(1..=52).contains(&bits) {
                return Err(Error::invalid("sim.encoder_bits", "must be in 1..=52"));
            }
        }
        Ok(())
    }
}

/// Simulate the closed loop from `init` and record one sample per
/// controller period (the end point included).
pub fn simulate(
    plant: &PlantParams,
    controller: &mut dyn Controller,
    cfg: &SimConfig,
    init: SimState,
) -> Result<Trajectory> {
    plant.validate()?;
    cfg.validate()?;
    let mut state = init;
    if plant.beta == 0.0 && state.mode == ContactMode::Gap && state.v_m == state.v_l {
        state.mode = ContactMode::EngagedLow;
    }
    state.check_consistent(plant.beta)?;

    let n = cfg.sample_count();
    let substeps = cfg.substeps();
    let ts = cfg.sample_period;
    let dt = ts / substeps as f64;
    let t0 = state.t;

    let mut traj = Trajectory::with_capacity(ts, cfg.encoder_bits, n + 1);
    let mut integrator = Integrator::new(plant, cfg.event_tolerance());
    let mut sensor = Sensor::new(cfg, state.x_m, state.v_m);

    for k in 0..=n {
        state.t = t0 + k as f64 * ts;
        if !state.is_finite() {
            return Err(Error::Diverged {
                t: state.t,
                reason: "non-finite state".into(),
            });
        }
        let v_seen = sensor.measure(state.x_m, state.v_m);
        let u = controller.update(state.t, v_seen, &mut traj.events);
        if !u.is_finite() {
            return Err(Error::Diverged {
                t: state.t,
                reason: "non-finite control output".into(),
            });
        }
        let tau = integrator.link_torque(&state, u);
        traj.push(&state, u, tau);
        if k == n {
            break;
        }
        for _ in 0..substeps {
            integrator.substep(&mut state, u, dt, &mut traj)?;
        }
    }
    Ok(traj)
}

/// Encoder model plus loop delay.
struct Sensor {
    resolution: Option<f64>,
    sample_period: f64,
    prev_position: f64,
    delay: VecDeque<f64>,
    delay_samples: usize,
}

impl Sensor {
    fn new(cfg: &SimConfig, x0: f64, v0: f64) -> Self {
        let resolution = cfg.encoder_bits.map(encoder_resolution);
        let q0 = resolution.map_or(x0, |r| (x0 / r).round() * r);
        let first = if resolution.is_some() { 0.0 } else { v0 };
        Self {
            resolution,
            sample_period: cfg.sample_period,
            prev_position: q0,
            delay: std::iter::repeat(first).take(cfg.loop_delay_samples).collect(),
            delay_samples: cfg.loop_delay_samples,
        }
    }

    fn measure(&mut self, x_m: f64, v_m: f64) -> f64 {
        let v = match self.resolution {
            None => v_m,
            Some(r) => {
                let q = (x_m / r).round() * r;
                let v = (q - self.prev_position) / self.sample_period;
                self.prev_position = q;
                v
            }
        };
        if self.delay_samples == 0 {
            return v;
        }
        self.delay.push_back(v);
        self.delay.pop_front().unwrap_or(v)
    }
}

#[derive(Debug, Clone, Copy)]
struct BodyAccel {
    accel: f64,
    stuck: bool,
}

/// Single body under viscous + Coulomb friction with a Karnopp band.
fn body_accel(inertia: f64, damping: f64, coulomb: f64, v_stick: f64, v: f64, external: f64) -> BodyAccel {
    let applied = external - damping * v;
    if v.abs() > v_stick {
        BodyAccel {
            accel: (applied - coulomb * v.signum()) / inertia,
            stuck: false,
        }
    } else if applied.abs() <= coulomb {
        BodyAccel {
            accel: 0.0,
            stuck: true,
        }
    } else {
        BodyAccel {
            accel: (applied - coulomb * applied.signum()) / inertia,
            stuck: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Accel {
    Gap { motor: BodyAccel, load: BodyAccel },
    Engaged(BodyAccel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Transition {
    /// Gap closes on the given side (+1: `x_L = x_m - beta`).
    Impact(f64),
    MotorStop,
    LoadStop,
    CommonStop,
    Detach,
}

struct Integrator<'a> {
    p: &'a PlantParams,
    event_tol: f64,
    rigid: bool,
}

impl<'a> Integrator<'a> {
    fn new(p: &'a PlantParams, event_tol: f64) -> Self {
        Self {
            p,
            event_tol,
            rigid: p.beta == 0.0,
        }
    }

    fn accel(&self, st: &SimState, u: f64) -> Accel {
        let p = self.p;
        if st.mode.is_engaged() {
            Accel::Engaged(body_accel(
                p.lumped_inertia(),
                p.lumped_damping(),
                p.lumped_coulomb(),
                p.v_stick,
                st.v_m,
                u,
            ))
        } else {
            Accel::Gap {
                motor: body_accel(p.motor_inertia, p.motor_damping, p.motor_coulomb, p.v_stick, st.v_m, u),
                load: body_accel(p.load_inertia, p.load_damping, p.load_coulomb, p.v_stick, st.v_l, 0.0),
            }
        }
    }

    /// Transmitted torque in contact, recovered from the load equation.
    fn link_torque(&self, st: &SimState, u: f64) -> f64 {
        if !st.mode.is_engaged() {
            return 0.0;
        }
        let p = self.p;
        let v = st.v_m;
        let lumped = body_accel(
            p.lumped_inertia(),
            p.lumped_damping(),
            p.lumped_coulomb(),
            p.v_stick,
            v,
            u,
        );
        if lumped.stuck {
            // Both at rest: the motor's own stiction absorbs what it can.
            let applied = u - p.motor_damping * v;
            return applied - applied.abs().min(p.motor_coulomb) * applied.signum();
        }
        let load_friction = if v.abs() > p.v_stick {
            p.load_coulomb * v.signum()
        } else {
            p.load_coulomb * lumped.accel.signum()
        };
        p.load_inertia * lumped.accel + p.load_damping * v + load_friction
    }

    fn trial(&self, st: &SimState, acc: Accel, h: f64) -> SimState {
        let mut out = *st;
        out.t += h;
        match acc {
            Accel::Gap { motor, load } => {
                out.v_m = if motor.stuck { 0.0 } else { st.v_m + motor.accel * h };
                out.v_l = if load.stuck { 0.0 } else { st.v_l + load.accel * h };
                out.x_m = st.x_m + out.v_m * h;
                out.x_l = st.x_l + out.v_l * h;
            }
            Accel::Engaged(b) => {
                let v = if b.stuck { 0.0 } else { st.v_m + b.accel * h };
                out.v_m = v;
                out.v_l = v;
                out.x_m = st.x_m + v * h;
                out.x_l = out.x_m - st.mode.side() * self.p.beta;
            }
        }
        out
    }

    fn crossed(&self, tr: Transition, start: &SimState, end: &SimState, u: f64) -> bool {
        let beta = self.p.beta;
        match tr {
            Transition::Impact(side) => {
                let g0 = beta - side * start.delta();
                let g1 = beta - side * end.delta();
                g0 > 0.0 && g1 <= 0.0
            }
            Transition::MotorStop | Transition::CommonStop => start.v_m != 0.0 && start.v_m.signum() * end.v_m < 0.0,
            Transition::LoadStop => start.v_l != 0.0 && start.v_l.signum() * end.v_l < 0.0,
            Transition::Detach => start.mode.side() * self.link_torque(end, u) < 0.0,
        }
    }

    /// Earliest transition inside `[0, h]` as a fraction of `h`.
    fn earliest(&self, st: &SimState, acc: Accel, u: f64, h: f64, end: &SimState) -> Option<(Transition, f64)> {
        let candidates: &[Transition] = if st.mode.is_engaged() {
            if self.rigid {
                &[Transition::CommonStop]
            } else {
                &[Transition::Detach, Transition::CommonStop]
            }
        } else if self.p.beta.is_finite() {
            &[
                Transition::Impact(1.0),
                Transition::Impact(-1.0),
                Transition::MotorStop,
                Transition::LoadStop,
            ]
        } else {
            &[Transition::MotorStop, Transition::LoadStop]
        };

        let mut best: Option<(Transition, f64)> = None;
        for &tr in candidates {
            if !self.crossed(tr, st, end, u) {
                continue;
            }
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while (hi - lo) * h > self.event_tol {
                let mid = 0.5 * (lo + hi);
                if self.crossed(tr, st, &self.trial(st, acc, mid * h), u) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if best.map_or(true, |(_, s)| hi < s) {
                best = Some((tr, hi));
            }
        }
        best
    }

    fn substep(&mut self, st: &mut SimState, u: f64, dt: f64, log: &mut Trajectory) -> Result<()> {
        let mut remaining = dt;
        let mut resolved = 0usize;
        while remaining > 0.0 {
            if resolved >= MAX_EVENTS_PER_SUBSTEP {
                // Event storm (e.g. grazing contact): finish without localization.
                let acc = self.accel(st, u);
                *st = self.trial(st, acc, remaining);
                break;
            }
            resolved += 1;

            if st.mode.is_engaged() {
                if !self.rigid && st.mode.side() * self.link_torque(st, u) < 0.0 {
                    log.events.push(Event::new(st.t, EventKind::Detach, st.mode.side()));
                    st.mode = ContactMode::Gap;
                    continue;
                }
            } else if self.p.beta.is_finite() {
                let delta = st.delta();
                let closing = st.v_m - st.v_l;
                if delta >= self.p.beta && closing > 0.0 {
                    self.impact(st, 1.0, log);
                    continue;
                }
                if delta <= -self.p.beta && closing < 0.0 {
                    self.impact(st, -1.0, log);
                    continue;
                }
            }

            let acc = self.accel(st, u);
            let end = self.trial(st, acc, remaining);
            match self.earliest(st, acc, u, remaining, &end) {
                None => {
                    *st = end;
                    break;
                }
                Some((tr, frac)) => {
                    let h = frac * remaining;
                    *st = self.trial(st, acc, h);
                    remaining -= h;
                    self.apply(st, tr, log);
                }
            }
        }
        if st.mode == ContactMode::Gap {
            st.x_l = play_clamp(st.x_l, st.x_m, self.p.beta);
        }
        if !st.is_finite() {
            return Err(Error::Diverged {
                t: st.t,
                reason: "non-finite state during integration".into(),
            });
        }
        Ok(())
    }

    fn apply(&self, st: &mut SimState, tr: Transition, log: &mut Trajectory) {
        match tr {
            Transition::Impact(side) => self.impact(st, side, log),
            Transition::MotorStop => st.v_m = 0.0,
            Transition::LoadStop => st.v_l = 0.0,
            Transition::CommonStop => {
                st.v_m = 0.0;
                st.v_l = 0.0;
            }
            Transition::Detach => {
                log.events.push(Event::new(st.t, EventKind::Detach, st.mode.side()));
                st.mode = ContactMode::Gap;
            }
        }
    }

    fn impact(&self, st: &mut SimState, side: f64, log: &mut Trajectory) {
        let p = self.p;
        let (m, big_m) = (p.motor_inertia, p.load_inertia);
        let (v_m, v_l) = (st.v_m, st.v_l);
        st.x_l = st.x_m - side * p.beta;
        let (mut a, mut b) = post_impact_velocities(v_m, v_l, m, big_m, p.epsilon);
        let merged = p.epsilon == 0.0 || (a - b).abs() < p.v_stick;
        if merged {
            let common = (m * v_m + big_m * v_l) / (m + big_m);
            a = common;
            b = common;
        }
        st.v_m = a;
        st.v_l = b;
        log.events.push(Event::new(st.t, EventKind::Impact, (v_m - v_l).abs()));
        log.impacts.push(ImpactRecord {
            t: st.t,
            v_m_before: v_m,
            v_l_before: v_l,
            v_m_after: a,
            v_l_after: b,
            merged,
        });
        if merged {
            st.mode = if side > 0.0 {
                ContactMode::EngagedLow
            } else {
                ContactMode::EngagedHigh
            };
            log.events.push(Event::new(st.t, EventKind::Engage, side));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::RelayController;
    use crate::model::RelayConfig;

    struct Constant(f64);

    impl Controller for Constant {
        fn update(&mut self, _t: f64, _v: f64, _events: &mut Vec<Event>) -> f64 {
            self.0
        }
    }

    fn plant() -> PlantParams {
        PlantParams::table1()
    }

    #[test]
    fn zero_input_at_rest_stays_put() {
        for mode_state in [
            SimState::at_rest(0.001, 0.0),
            SimState {
                x_m: 0.0,
                x_l: -plant().beta,
                mode: ContactMode::EngagedLow,
                ..SimState::default()
            },
        ] {
            let cfg = SimConfig::new(4e-4, 10, 0.5);
            let traj = simulate(&plant(), &mut Constant(0.0), &cfg, mode_state).unwrap();
            for k in 0..traj.len() {
                assert_eq!(traj.x_m[k], mode_state.x_m);
                assert_eq!(traj.x_l[k], mode_state.x_l);
                assert_eq!(traj.v_m[k], 0.0);
            }
            assert!(traj.events.is_empty());
        }
    }

    #[test]
    fn sub_breakaway_torque_does_not_creep() {
        let cfg = SimConfig::new(4e-4, 10, 0.2);
        let traj = simulate(&plant(), &mut Constant(0.04), &cfg, SimState::at_rest(0.0, 0.0)).unwrap();
        assert!(traj.x_m.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_inconsistent_init() {
        let cfg = SimConfig::new(4e-4, 10, 0.1);
        let bad = SimState::at_rest(0.02, 0.0);
        assert!(matches!(
            simulate(&plant(), &mut Constant(0.0), &cfg, bad),
            Err(Error::InconsistentState(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(4e-4, 10, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.duration = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::new(4e-4, 10, 1.0);
        cfg.dt = 3e-5;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::new(4e-4, 10, 1.0);
        cfg.event_tol = Some(1e-3);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn elastic_exchange_between_free_bodies() {
        // Frictionless, undamped bodies: motor at v hits a resting load.
        let mut p = plant();
        p.motor_damping = 0.0;
        p.load_damping = 0.0;
        p.motor_coulomb = 0.0;
        p.load_coulomb = 0.0;
        p.epsilon = 1.0;
        let init = SimState {
            x_m: 0.0,
            v_m: 0.1,
            x_l: 0.0,
            ..SimState::default()
        };
        let cfg = SimConfig::new(4e-4, 10, 0.2);
        let traj = simulate(&p, &mut Constant(0.0), &cfg, init).unwrap();
        assert_eq!(traj.impacts.len(), 1);
        let imp = traj.impacts[0];
        assert!((imp.t - p.beta / 0.1).abs() <= cfg.event_tolerance());
        assert!(imp.v_m_after.abs() < 1e-15);
        assert!((imp.v_l_after - 0.1).abs() < 1e-15);
        let last = traj.len() - 1;
        assert!((traj.v_l[last] - 0.1).abs() < 1e-12);
        assert!(traj.v_m[last].abs() < 1e-12);
    }

    #[test]
    fn plastic_impact_engages_and_lumped_motion_follows() {
        let mut p = plant();
        p.epsilon = 0.0;
        let init = SimState {
            v_m: 0.0,
            ..SimState::default()
        };
        let cfg = SimConfig::new(4e-4, 10, 0.3);
        let traj = simulate(&p, &mut Constant(0.3), &cfg, init).unwrap();
        let engage = traj.events_of(EventKind::Engage).count();
        assert_eq!(engage, 1);
        let last = traj.len() - 1;
        assert_eq!(traj.mode[last], ContactMode::EngagedLow);
        assert!((traj.x_m[last] - traj.x_l[last] - p.beta).abs() < 1e-12);
        assert!(traj.tau[last] > 0.0);
    }

    #[test]
    fn detaches_when_drive_reverses() {
        let mut p = plant();
        p.epsilon = 0.0;
        let init = SimState {
            x_m: 0.0,
            x_l: -p.beta,
            v_m: 1.0,
            v_l: 1.0,
            mode: ContactMode::EngagedLow,
            ..SimState::default()
        };
        let cfg = SimConfig::new(4e-4, 10, 0.05);
        let traj = simulate(&p, &mut Constant(-0.5), &cfg, init).unwrap();
        assert_eq!(traj.events[0].kind, EventKind::Detach);
        assert_eq!(traj.mode[1], ContactMode::Gap);
    }

    #[test]
    fn modes_stay_consistent_under_relay() {
        let p = plant();
        let relay = RelayConfig::alternating(0.1, 0.12, 2.0, 1.0);
        let mut ctl = RelayController::new(relay);
        let cfg = SimConfig::new(4e-4, 10, 4.0);
        let init = SimState::at_rest(-p.beta, 0.0);
        let traj = simulate(&p, &mut ctl, &cfg, init).unwrap();
        let vmax = traj.v_m.iter().chain(&traj.v_l).fold(0.0f64, |a, v| a.max(v.abs()));
        let bound = cfg.event_tolerance() * vmax + 1e-12;
        for k in 0..traj.len() {
            let st = traj.state(k);
            match st.mode {
                ContactMode::Gap => assert!(st.delta().abs() <= p.beta + bound),
                m => {
                    assert!((st.delta() - m.side() * p.beta).abs() <= bound);
                    assert!((st.v_m - st.v_l).abs() <= p.v_stick);
                }
            }
        }
        assert!(!traj.impacts.is_empty());
        for w in traj.events.windows(2) {
            assert!(w[0].t <= w[1].t);
        }
    }

    #[test]
    fn deterministic() {
        let p = plant();
        let run = || {
            let mut ctl = RelayController::new(RelayConfig::alternating(0.1, 0.1, 2.5, 0.5));
            simulate(&p, &mut ctl, &SimConfig::new(4e-4, 10, 1.5), SimState::default()).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn encoder_quantization_and_delay_reach_controller() {
        struct Probe(Vec<f64>);
        impl Controller for Probe {
            fn update(&mut self, _t: f64, v: f64, _e: &mut Vec<Event>) -> f64 {
                self.0.push(v);
                0.5
            }
        }
        let p = plant().with_beta(f64::INFINITY);
        let mut cfg = SimConfig::new(4e-4, 10, 0.01).with_delay(2);
        cfg.encoder_bits = Some(20);
        let mut probe = Probe(Vec::new());
        let traj = simulate(&p, &mut probe, &cfg, SimState::default()).unwrap();
        let res = encoder_resolution(20);
        // First two readings come from the pre-filled delay line.
        assert_eq!(&probe.0[..2], &[0.0, 0.0]);
        let trace = traj.motor_trace();
        for k in 2..probe.0.len() {
            assert!((probe.0[k] - trace.v_m[k - 2]).abs() < 1e-9);
            let counts = probe.0[k] * 4e-4 / res;
            assert!((counts - counts.round()).abs() < 1e-6);
        }
    }
}
