use serde::{Deserialize, Serialize};

use super::{EventKind, Trajectory};

/// Relay limit-cycle measurements taken from a simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    /// Number of full periods measured.
    pub periods: usize,
    /// Mean time between consecutive relay switches (s).
    pub half_period: f64,
    /// Mean time between switches onto the same branch (s).
    pub period: f64,
    /// Mean peak-to-peak motor position over one period (rad).
    pub amplitude: f64,
    /// Mean net motor displacement per period (rad).
    pub drift_per_period: f64,
    /// Mean |v_m| at the switching samples (rad/s).
    pub switch_speed: f64,
}

/// Measure the relay cycle from the switches after `t_from`. Returns `None`
/// when fewer than three switches are available.
pub fn measure_cycles(traj: &Trajectory, t_from: f64) -> Option<CycleStats> {
    let t0 = *traj.t.first()?;
    let idx: Vec<usize> = traj
        .events_of(EventKind::RelaySwitch)
        .filter(|e| e.t >= t_from)
        .map(|e| (((e.t - t0) / traj.sample_period).round() as usize).min(traj.len() - 1))
        .collect();
    if idx.len() < 3 {
        return None;
    }
    let half: Vec<f64> = idx.windows(2).map(|w| traj.t[w[1]] - traj.t[w[0]]).collect();
    let mut amp = Vec::new();
    let mut drift = Vec::new();
    let mut period = Vec::new();
    for w in idx.windows(3) {
        let (a, b) = (w[0], w[2]);
        let seg = &traj.x_m[a..=b];
        let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
        amp.push(hi - lo);
        drift.push(traj.x_m[b] - traj.x_m[a]);
        period.push(traj.t[b] - traj.t[a]);
    }
    let speed: Vec<f64> = idx.iter().map(|&k| traj.v_m[k].abs()).collect();
    Some(CycleStats {
        periods: amp.len(),
        half_period: mean(&half),
        period: mean(&period),
        amplitude: mean(&amp),
        drift_per_period: mean(&drift),
        switch_speed: mean(&speed),
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
