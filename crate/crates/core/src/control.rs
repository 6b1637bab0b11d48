//! Feedback controllers and reference generators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{positive, HysteronState, RelayConfig};
use crate::sim::{Event, EventKind};

/// Sampled feedback law driven by the measured motor velocity.
pub trait Controller {
    /// Control torque (N·m) to hold over the next sample period.
    fn update(&mut self, t: f64, measured_velocity: f64, events: &mut Vec<Event>) -> f64;
}

/// Delayed relay in negative feedback of the motor velocity: `u = -H[v_m]`.
#[derive(Debug, Clone)]
pub struct RelayController {
    cfg: RelayConfig,
    hysteron: Option<HysteronState>,
    segment: Option<usize>,
}

impl RelayController {
    pub fn new(cfg: RelayConfig) -> Self {
        Self {
            cfg,
            hysteron: None,
            segment: None,
        }
    }

    pub fn config(&self) -> &RelayConfig {
        &self.cfg
    }

    pub fn hysteron(&self) -> Option<HysteronState> {
        self.hysteron
    }
}

impl Controller for RelayController {
    fn update(&mut self, t: f64, v_m: f64, events: &mut Vec<Event>) -> f64 {
        let segment = self.cfg.segment_index_at(t);
        if self.cfg.schedule.len() > 1 && self.segment.is_some_and(|s| s != segment) {
            events.push(Event::new(t, EventKind::ScheduleFlip, segment as f64));
        }
        self.segment = Some(segment);
        let alphas = (
            self.cfg.schedule[segment].alpha_plus,
            self.cfg.schedule[segment].alpha_minus,
        );

        let next = match self.hysteron {
            None => HysteronState::initial(v_m, self.cfg.e),
            Some(prev) => prev.advance(v_m, self.cfg.e),
        };
        let u = -next.output(self.cfg.h0, alphas);
        if self.hysteron.is_some_and(|prev| prev.branch != next.branch) {
            events.push(Event::new(t, EventKind::RelaySwitch, u));
        }
        self.hysteron = Some(next);
        u
    }
}

/// PI velocity controller gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiConfig {
    /// Proportional gain (N·m·s/rad).
    pub kp: f64,
    /// Integral gain (N·m/rad).
    pub ki: f64,
    /// Design bandwidth (Hz).
    pub bandwidth_hz: f64,
}

impl PiConfig {
    pub fn validate(&self) -> Result<()> {
        positive("controller.pi.kp", self.kp)?;
        positive("controller.pi.ki", self.ki)?;
        positive("controller.pi.bandwidth_hz", self.bandwidth_hz)
    }
}

/// Pole placement for `J v' = -c v + u` under PI feedback: both
/// closed-loop poles at `s = -2 pi bandwidth`.
pub fn pi_gains_from_bandwidth(inertia: f64, damping: f64, bandwidth_hz: f64) -> Result<PiConfig> {
    positive("inertia", inertia)?;
    if !(damping.is_finite() && damping >= 0.0) {
        return Err(Error::invalid("damping", "must be finite and >= 0"));
    }
    positive("bandwidth_hz", bandwidth_hz)?;
    let omega = 2.0 * PI * bandwidth_hz;
    let kp = 2.0 * inertia * omega - damping;
    // Rounding at the c/(2J) boundary must not reject kp = 0.
    if kp < -1e-12 * damping {
        return Err(Error::invalid(
            "bandwidth_hz",
            format!(
                "omega below c/(2J) = {:.4} rad/s gives kp = {kp:.3e} < 0",
                damping / (2.0 * inertia)
            ),
        ));
    }
    Ok(PiConfig {
        kp: kp.max(0.0),
        ki: inertia * omega * omega,
        bandwidth_hz,
    })
}

/// PI controller state with a trapezoidal (Tustin) integrator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState {
    pub integral: f64,
    pub prev_error: f64,
}

/// One PI update. The proportional path acts on the current sample.
pub fn pi_controller_step(cfg: &PiConfig, state: &mut PiState, reference: f64, v_m: f64, sample_period: f64) -> f64 {
    let error = reference - v_m;
    state.integral += 0.5 * sample_period * (error + state.prev_error);
    state.prev_error = error;
    cfg.kp * error + cfg.ki * state.integral
}

/// Triangular velocity reference: zero-mean, starts at 0 rising with
/// `+slope`, apexes at `period/4 + k*period/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleRef {
    /// Ramp magnitude (rad/s²).
    pub slope: f64,
    /// Period (s).
    pub period: f64,
}

impl TriangleRef {
    pub fn peak(&self) -> f64 {
        self.slope * self.period / 4.0
    }

    /// Apex instants within `[0, t_end]`, alternating maximum and minimum.
    pub fn apex_times(&self, t_end: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let t = self.period / 4.0 + k as f64 * self.period / 2.0;
            if t > t_end {
                return out;
            }
            out.push(t);
            k += 1;
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("controller.triangle.slope", self.slope)?;
        positive("controller.triangle.period", self.period)
    }
}

pub fn triangle_velocity_ref(t: f64, tri: &TriangleRef) -> f64 {
    let p = tri.period;
    let phase = (t / p).rem_euclid(1.0) * p;
    let peak = tri.peak();
    if phase < p / 4.0 {
        tri.slope * phase
    } else if phase < 3.0 * p / 4.0 {
        peak - tri.slope * (phase - p / 4.0)
    } else {
        -peak + tri.slope * (phase - 3.0 * p / 4.0)
    }
}

/// PI velocity loop tracking a triangular reference.
#[derive(Debug, Clone)]
pub struct PiTriangleController {
    pub gains: PiConfig,
    pub reference: TriangleRef,
    sample_period: f64,
    state: PiState,
}

impl PiTriangleController {
    pub fn new(gains: PiConfig, reference: TriangleRef, sample_period: f64) -> Self {
        Self {
            gains,
            reference,
            sample_period,
            state: PiState::default(),
        }
    }
}

impl Controller for PiTriangleController {
    fn update(&mut self, t: f64, v_m: f64, _events: &mut Vec<Event>) -> f64 {
        let r = triangle_velocity_ref(t, &self.reference);
        pi_controller_step(&self.gains, &mut self.state, r, v_m, self.sample_period)
    }
}
