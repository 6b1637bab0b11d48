use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::analytics::RelayPredictions;
use crate::control::PiConfig;
use crate::ident::{BacklashEstimate, ReadingDetail};
use crate::sim::CycleStats;

/// One simulated quantity against its closed-form prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub predicted: f64,
    pub simulated: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Whether a failure changes the run outcome.
    pub gating: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl OracleCheck {
    pub fn new(name: &str, predicted: f64, simulated: f64, tolerance: f64, gating: bool) -> Self {
        let relative_error = ((simulated - predicted) / predicted).abs();
        Self {
            name: name.to_string(),
            predicted,
            simulated,
            relative_error,
            tolerance,
            passed: relative_error <= tolerance,
            gating,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Impact audit and event counts of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub samples: usize,
    pub duration: f64,
    pub relay_switches: usize,
    pub impacts: usize,
    pub engagements: usize,
    pub detachments: usize,
    /// Largest relative momentum change over all impacts.
    pub max_momentum_error: f64,
    /// Largest relative kinetic energy gain over all impacts (<= 0 is ideal).
    pub max_energy_gain: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub true_two_beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<BacklashEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failure_diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    EstimationFailed,
    ChecksFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictions: Option<RelayPredictions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi_gains: Option<PiConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identification: Option<EstimateSummary>,
    pub checks: Vec<OracleCheck>,
    pub outcome: Outcome,
}

impl RunReport {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            predictions: None,
            pi_gains: None,
            simulation: None,
            identification: None,
            checks: Vec::new(),
            outcome: Outcome::Success,
        }
    }

    /// Settle the outcome from estimation status and gating checks.
    pub(crate) fn finish(&mut self) {
        let failed_estimate = self.identification.as_ref().is_some_and(|i| i.estimate.is_none());
        let failed_check = self.checks.iter().any(|c| c.gating && !c.passed)
            || self.predictions.as_ref().is_some_and(|p| !p.conditions.all);
        self.outcome = if failed_estimate {
            Outcome::EstimationFailed
        } else if failed_check {
            Outcome::ChecksFailed
        } else {
            Outcome::Success
        };
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable report; angles in mrad.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let cfg = &self.config;
        let p = &cfg.plant;
        let _ = writeln!(s, "# {} — {}", cfg.name, self.command);
        let _ = writeln!(
            s,
            "plant: m={:e} M={:e} kg·m², d={} D={} N·m·s/rad, f={} F={} N·m, 2β={} mrad, ε={}",
            p.motor_inertia,
            p.load_inertia,
            p.motor_damping,
            p.load_damping,
            p.motor_coulomb,
            p.load_coulomb,
            mrad_or_inf(2.0 * p.beta),
            p.epsilon
        );
        if let Some(seed) = cfg.seed {
            let _ = writeln!(s, "seed: {seed}");
        }
        if let Some(pred) = &self.predictions {
            let c = &pred.conditions;
            let _ = writeln!(
                s,
                "\n## closed-form predictions (h0={} N·m, e={} rad/s)",
                pred.h0, pred.e
            );
            let _ = writeln!(
                s,
                "conditions: e<h/d {}  h>f {}  e<2f/d {}  all {}",
                yes(c.threshold_below_drive),
                yes(c.drive_above_friction),
                yes(c.threshold_below_friction),
                yes(c.all)
            );
            if let Some(note) = &c.note {
                let _ = writeln!(s, "  note: {note}");
            }
            let _ = writeln!(s, "X_xi (amplitude) [mrad]: {}", opt_mrad(pred.amplitude));
            let _ = writeln!(
                s,
                "X_xi exact phase portrait [mrad]: {}",
                opt_mrad(pred.amplitude_exact)
            );
            let _ = writeln!(s, "t* (half period) [ms]: {}", opt_ms(pred.half_period));
            for d in &pred.drift {
                let _ = writeln!(
                    s,
                    "alpha=({}, {}): X_C printed {} / cross-term {} / exact {} [mrad], T_C {} [ms]",
                    d.alpha_plus,
                    d.alpha_minus,
                    opt_mrad(d.drift_printed),
                    opt_mrad(d.drift_cross_term),
                    opt_mrad(d.drift_exact),
                    opt_ms(d.period)
                );
            }
            let _ = writeln!(s, "X_L after impact [mrad]: {}", opt_mrad(pred.load_displacement));
        }
        if let Some(g) = &self.pi_gains {
            let _ = writeln!(
                s,
                "\n## PI gains\nkp={:.6} N·m·s/rad  ki={:.6} N·m/rad  bandwidth={} Hz",
                g.kp, g.ki, g.bandwidth_hz
            );
        }
        if let Some(sim) = &self.simulation {
            let _ = writeln!(s, "\n## simulation");
            let _ = writeln!(
                s,
                "samples {}  duration {} s  relay switches {}  impacts {}  engagements {}  detachments {}",
                sim.samples, sim.duration, sim.relay_switches, sim.impacts, sim.engagements, sim.detachments
            );
            let _ = writeln!(
                s,
                "impact audit: max momentum error {:.3e} (relative), max energy gain {:.3e} (relative)",
                sim.max_momentum_error, sim.max_energy_gain
            );
            if let Some(c) = &sim.cycle {
                let _ = writeln!(
                    s,
                    "cycle over {} periods: amplitude {:.6} mrad, half period {:.6} ms, drift/period {:.6} mrad, switch speed {:.6} rad/s",
                    c.periods,
                    c.amplitude * 1e3,
                    c.half_period * 1e3,
                    c.drift_per_period * 1e3,
                    c.switch_speed
                );
            }
        }
        if !self.checks.is_empty() {
            let _ = writeln!(s, "\n## oracle cross-checks (SI units)");
            for c in &self.checks {
                let _ = writeln!(
                    s,
                    "[{}] {}{}: predicted {:.6e}, simulated {:.6e}, rel. error {:.3}% (tol {}%)",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    if c.gating { "" } else { " (informational)" },
                    c.predicted,
                    c.simulated,
                    100.0 * c.relative_error,
                    100.0 * c.tolerance
                );
                if let Some(n) = &c.note {
                    let _ = writeln!(s, "       {n}");
                }
            }
        }
        if let Some(id) = &self.identification {
            let _ = writeln!(s, "\n## identification");
            let _ = writeln!(s, "configured 2β: {} mrad", mrad_or_inf(id.true_two_beta));
            match &id.estimate {
                Some(est) => {
                    let _ = writeln!(s, "method: {}", est.method.label());
                    for r in &est.readings {
                        let _ = writeln!(
                            s,
                            "  interval {:>3}: 2β̂ = {:.3} mrad  {}",
                            r.interval,
                            r.two_beta * 1e3,
                            detail_text(&r.detail)
                        );
                    }
                    let _ = writeln!(
                        s,
                        "mean 2β̂ = {:.3} mrad, std {:.3} mrad over {} readings",
                        est.mean_2beta * 1e3,
                        est.std_2beta * 1e3,
                        est.readings.len()
                    );
                    if let Some(e) = id.relative_error {
                        let _ = writeln!(s, "relative error vs configured: {:+.2}%", 100.0 * e);
                    }
                    for d in &est.diagnostics {
                        let _ = writeln!(s, "  diagnostic: {d}");
                    }
                }
                None => {
                    let _ = writeln!(s, "FAILED: {}", id.failure.as_deref().unwrap_or("unknown"));
                    for d in &id.failure_diagnostics {
                        let _ = writeln!(s, "  diagnostic: {d}");
                    }
                }
            }
        }
        let _ = writeln!(s, "\noutcome: {:?}", self.outcome);
        s
    }
}

fn detail_text(d: &ReadingDetail) -> String {
    match d {
        ReadingDetail::ChangePoint {
            start_time,
            breakpoint_time,
            gap_slope,
            engaged_slope,
        } => format!(
            "start {start_time:.4} s, break {breakpoint_time:.4} s, slopes gap {:.4} / engaged {:.4} mrad/s",
            gap_slope * 1e3,
            engaged_slope * 1e3
        ),
        ReadingDetail::SpeedIntegration {
            apex_time,
            t1,
            t2,
            load_speed,
        } => format!("apex {apex_time:.4} s, t1 {t1:.4} s, t2 {t2:.4} s, load speed {load_speed:.4} rad/s"),
        ReadingDetail::Loop { x_l } => format!("at x_L {:.3} mrad", x_l * 1e3),
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "NO"
    }
}

fn mrad_or_inf(v: f64) -> String {
    if v.is_finite() {
        format!("{:.3}", v * 1e3)
    } else {
        "unbounded".into()
    }
}

fn opt_mrad(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.6}", x * 1e3))
}

fn opt_ms(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.6}", x * 1e3))
}
