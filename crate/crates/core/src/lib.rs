//! Simulation and identification of two-mass drives with backlash.
//!
//! The crate covers the hybrid motor/load model with a play-type gap, the
//! delayed relay and PI velocity controllers, the closed-form relay
//! limit-cycle formulas, and motor-side backlash estimators.

pub mod analytics;
pub mod control;
pub mod error;
pub mod experiment;
pub mod ident;
pub mod model;
pub mod sim;

pub use control::{
    pi_controller_step, pi_gains_from_bandwidth, triangle_velocity_ref, Controller, PiConfig, PiState,
    PiTriangleController, RelayController, TriangleRef,
};
pub use error::{Error, Result};
pub use model::{
    coulomb_force, hysteron_step, play_step, Branch, ContactMode, HysteronState, PlantParams, RelayConfig,
    ScheduleSegment, SimState,
};
pub use sim::{simulate, Event, EventKind, MotorTrace, SimConfig, Trajectory};
