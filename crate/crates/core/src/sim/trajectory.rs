use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ContactMode, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    RelaySwitch,
    Impact,
    Engage,
    Detach,
    ScheduleFlip,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::RelaySwitch => "relay_switch",
            EventKind::Impact => "impact",
            EventKind::Engage => "engage",
            EventKind::Detach => "detach",
            EventKind::ScheduleFlip => "schedule_flip",
        }
    }
}

/// Discrete event. `payload` carries the new torque for relay switches,
/// the approach speed for impacts, the contact side for engage/detach and
/// the schedule index for flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub payload: f64,
}

impl Event {
    pub fn new(t: f64, kind: EventKind, payload: f64) -> Self {
        Self { t, kind, payload }
    }
}

/// Velocities immediately before and after an impact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactRecord {
    pub t: f64,
    pub v_m_before: f64,
    pub v_l_before: f64,
    pub v_m_after: f64,
    pub v_l_after: f64,
    pub merged: bool,
}

/// Uniformly sampled simulation record.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub sample_period: f64,
    pub encoder_bits: Option<u32>,
    pub t: Vec<f64>,
    pub x_m: Vec<f64>,
    pub v_m: Vec<f64>,
    pub x_l: Vec<f64>,
    pub v_l: Vec<f64>,
    pub u: Vec<f64>,
    pub tau: Vec<f64>,
    pub mode: Vec<ContactMode>,
    pub events: Vec<Event>,
    pub impacts: Vec<ImpactRecord>,
}

impl Trajectory {
    pub(crate) fn with_capacity(sample_period: f64, encoder_bits: Option<u32>, n: usize) -> Self {
        Self {
            sample_period,
            encoder_bits,
            t: Vec::with_capacity(n),
            x_m: Vec::with_capacity(n),
            v_m: Vec::with_capacity(n),
            x_l: Vec::with_capacity(n),
            v_l: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            tau: Vec::with_capacity(n),
            mode: Vec::with_capacity(n),
            ..Default::default()
        }
    }

    pub(crate) fn push(&mut self, st: &SimState, u: f64, tau: f64) {
        self.t.push(st.t);
        self.x_m.push(st.x_m);
        self.v_m.push(st.v_m);
        self.x_l.push(st.x_l);
        self.v_l.push(st.v_l);
        self.u.push(u);
        self.tau.push(tau);
        self.mode.push(st.mode);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state(&self, k: usize) -> SimState {
        SimState {
            t: self.t[k],
            x_m: self.x_m[k],
            v_m: self.v_m[k],
            x_l: self.x_l[k],
            v_l: self.v_l[k],
            mode: self.mode[k],
        }
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Motor-side channels only, as seen by the encoder.
    pub fn motor_trace(&self) -> MotorTrace {
        let (x_m, v_m) = match self.encoder_bits {
            None => (self.x_m.clone(), self.v_m.clone()),
            Some(bits) => {
                let res = encoder_resolution(bits);
                let q: Vec<f64> = self.x_m.iter().map(|&x| quantize(x, res)).collect();
                let mut v = Vec::with_capacity(q.len());
                for k in 0..q.len() {
                    let prev = if k == 0 { q[0] } else { q[k - 1] };
                    v.push((q[k] - prev) / self.sample_period);
                }
                (q, v)
            }
        };
        MotorTrace {
            sample_period: self.sample_period,
            t: self.t.clone(),
            x_m,
            v_m,
            schedule_flips: self.events_of(EventKind::ScheduleFlip).map(|e| e.t).collect(),
        }
    }

    /// Write `t,x_m,v_m,x_L,v_L,u,tau,mode`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "x_m", "v_m", "x_L", "v_L", "u", "tau", "mode"])?;
        for k in 0..self.len() {
            wr.write_record([
                self.t[k].to_string(),
                self.x_m[k].to_string(),
                self.v_m[k].to_string(),
                self.x_l[k].to_string(),
                self.v_l[k].to_string(),
                self.u[k].to_string(),
                self.tau[k].to_string(),
                self.mode[k].label().to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Write `t,kind,payload`.
    pub fn write_events_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "kind", "payload"])?;
        for e in &self.events {
            wr.write_record([e.t.to_string(), e.kind.label().to_string(), e.payload.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("trajectory.csv"))?)?;
        self.write_events_csv(std::fs::File::create(dir.join("events.csv"))?)?;
        Ok(())
    }
}

pub fn encoder_resolution(bits: u32) -> f64 {
    2.0 * std::f64::consts::PI / f64::from(bits).exp2()
}

fn quantize(x: f64, res: f64) -> f64 {
    (x / res).round() * res
}

/// Motor position and velocity samples plus the relay schedule flip
/// instants. This is all the proposed and reference methods get to see.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorTrace {
    pub sample_period: f64,
    pub t: Vec<f64>,
    pub x_m: Vec<f64>,
    pub v_m: Vec<f64>,
    pub schedule_flips: Vec<f64>,
}

impl MotorTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sample index at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        if self.t.is_empty() {
            return 0;
        }
        let k = ((t - self.t[0]) / self.sample_period - 1e-9).ceil();
        (k.max(0.0) as usize).min(self.t.len())
    }
}
