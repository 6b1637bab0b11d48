use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{
    pi_gains_from_bandwidth, Controller, PiConfig, PiTriangleController, RelayController, TriangleRef,
};
use crate::error::{Error, Result};
use crate::ident::ProposedOptions;
use crate::model::{PlantParams, RelayConfig, SimState};
use crate::sim::SimConfig;

/// Self-contained description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub init: SimState,
    #[serde(default)]
    pub identification: IdentificationConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Randomizes the initial relay phase (or gap position under PI).
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
/// Externally tagged so parse errors keep the full field path.
#[serde(rename_all = "snake_case")]
pub enum ControllerConfig {
    Relay(RelayConfig),
    PiTriangle(PiTriangleConfig),
}

/// PI gains are placed from `bandwidth_hz` unless both `kp` and `ki` are
/// given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiTriangleConfig {
    pub bandwidth_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ki: Option<f64>,
    pub triangle: TriangleRef,
}

impl PiTriangleConfig {
    pub fn gains(&self, plant: &PlantParams) -> Result<PiConfig> {
        match (self.kp, self.ki) {
            (Some(kp), Some(ki)) => {
                let g = PiConfig {
                    kp,
                    ki,
                    bandwidth_hz: self.bandwidth_hz,
                };
                g.validate()?;
                Ok(g)
            }
            (None, None) => pi_gains_from_bandwidth(plant.lumped_inertia(), plant.lumped_damping(), self.bandwidth_hz),
            _ => Err(Error::invalid("controller.kp", "give both kp and ki, or neither")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentificationConfig {
    #[default]
    None,
    Proposed(ProposedOptions),
    Reference(ReferenceConfig),
    TwoEncoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Minimum ratio of peak to median jerk for an impact signature.
    pub jerk_ratio_min: f64,
    /// Locate re-contact from the simulator's impact log instead.
    pub ground_truth_impacts: bool,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            jerk_ratio_min: 10.0,
            ground_truth_impacts: false,
        }
    }
}

/// Tolerances for the simulation-vs-closed-form cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Time discarded before measuring the cycle (s); capped at half the
    /// run.
    pub transient: f64,
    pub amplitude_tol: f64,
    pub period_tol: f64,
    pub drift_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            transient: 0.5,
            amplitude_tol: 0.01,
            period_tol: 0.01,
            drift_tol: 0.05,
        }
    }
}

/// Command-line adjustments applied on top of a config file.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub amplitude_correction: bool,
}

impl ExperimentConfig {
    /// Parse JSON, reporting the path of the offending field on error.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                Error::Config(e.into_inner().to_string())
            } else {
                Error::Config(format!("{path}: {}", e.into_inner()))
            }
        })?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(beta) = o.beta {
            // Keep a rest-state start consistent with the new gap.
            let old = self.plant.beta;
            self.plant.beta = beta;
            let delta = self.init.delta();
            if delta.abs() > beta && old.is_finite() {
                self.init.x_l = self.init.x_m - delta.signum() * beta;
            }
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.amplitude_correction {
            if let IdentificationConfig::Proposed(p) = &mut self.identification {
                p.amplitude_correction = true;
            }
        }
    }

    /// Full validation; nothing is written before this succeeds.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        self.plant.validate()?;
        self.sim.validate()?;
        match &self.controller {
            ControllerConfig::Relay(r) => r.validate()?,
            ControllerConfig::PiTriangle(p) => {
                p.triangle.validate()?;
                p.gains(&self.plant)?;
            }
        }
        self.init.check_consistent(self.plant.beta)?;
        let o = &self.oracle;
        for (field, v) in [
            ("oracle.transient", o.transient),
            ("oracle.amplitude_tol", o.amplitude_tol),
            ("oracle.period_tol", o.period_tol),
            ("oracle.drift_tol", o.drift_tol),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, "must be finite and >= 0"));
            }
        }
        match (&self.identification, &self.controller) {
            (IdentificationConfig::Proposed(p), ControllerConfig::Relay(r)) => {
                if r.schedule.len() < 2 {
                    return Err(Error::invalid(
                        "controller.schedule",
                        "proposed method needs an alternating schedule",
                    ));
                }
                if !p.slope_ratio_min.is_finite() || p.slope_ratio_min <= 0.0 {
                    return Err(Error::invalid("identification.slope_ratio_min", "must be > 0"));
                }
                if !(0.0..0.5).contains(&p.min_side_fraction) {
                    return Err(Error::invalid(
                        "identification.min_side_fraction",
                        "must lie in [0, 0.5)",
                    ));
                }
            }
            (IdentificationConfig::Proposed(_), _) => {
                return Err(Error::invalid(
                    "identification.method",
                    "proposed method needs a relay controller",
                ))
            }
            (IdentificationConfig::Reference(rc), ControllerConfig::PiTriangle(_)) => {
                if rc.jerk_ratio_min.is_nan() || rc.jerk_ratio_min < 0.0 {
                    return Err(Error::invalid("identification.jerk_ratio_min", "must be >= 0"));
                }
            }
            (IdentificationConfig::Reference(_), _) => {
                return Err(Error::invalid(
                    "identification.method",
                    "reference method needs a pi_triangle controller",
                ))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn relay(&self) -> Option<&RelayConfig> {
        match &self.controller {
            ControllerConfig::Relay(r) => Some(r),
            _ => None,
        }
    }

    pub fn build_controller(&self) -> Result<Box<dyn Controller>> {
        Ok(match &self.controller {
            ControllerConfig::Relay(r) => Box::new(RelayController::new(r.clone())),
            ControllerConfig::PiTriangle(p) => Box::new(PiTriangleController::new(
                p.gains(&self.plant)?,
                p.triangle,
                self.sim.sample_period,
            )),
        })
    }

    /// Initial state, randomized when a seed is set: the motor speed is
    /// drawn inside the relay dead band, or the gap position under PI.
    pub fn initial_state(&self) -> SimState {
        let mut init = self.init;
        let Some(seed) = self.seed else {
            return init;
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &self.controller {
            ControllerConfig::Relay(r) => {
                init.v_m = rng.gen_range(-r.e..r.e);
                if init.mode.is_engaged() {
                    init.v_l = init.v_m;
                }
            }
            ControllerConfig::PiTriangle(_) => {
                let beta = self.plant.beta;
                if beta.is_finite() && beta > 0.0 && !init.mode.is_engaged() {
                    init.x_l = init.x_m - rng.gen_range(-beta..beta);
                }
            }
        }
        init
    }
}
