//! Shared fixtures for the criterion benchmarks.

use backlash_core::experiment::{preset, ExperimentConfig};
use backlash_core::{simulate, MotorTrace, Trajectory};

/// A bundled preset shortened to `duration` seconds.
pub fn config(name: &str, duration: f64) -> ExperimentConfig {
    let mut cfg = preset(name).expect("bundled preset");
    cfg.sim.duration = duration;
    cfg
}

pub fn run(cfg: &ExperimentConfig) -> Trajectory {
    let mut ctl = cfg.build_controller().expect("valid controller");
    simulate(&cfg.plant, ctl.as_mut(), &cfg.sim, cfg.initial_state()).expect("simulation")
}

pub fn motor_trace(name: &str, duration: f64) -> (ExperimentConfig, MotorTrace) {
    let cfg = config(name, duration);
    let trace = run(&cfg).motor_trace();
    (cfg, trace)
}
