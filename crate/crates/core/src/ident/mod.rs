//! Backlash and friction estimators.
//!
//! The proposed and reference methods consume a [`MotorTrace`] only, so
//! load-side ground truth cannot leak into them.
//!
//! [`MotorTrace`]: crate::sim::MotorTrace

mod changepoint;
mod coulomb;
mod proposed;
mod reference;
mod two_encoder;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use changepoint::{fit_two_lines, ChangePointFit};
pub use coulomb::{coulomb_identify, CoulombFit, LineFit};
pub use proposed::{moving_average, propose_identify, DirectionFilter, ProposedOptions};
pub use reference::{reference_identify, ImpactDetector, ReferenceOptions};
pub use two_encoder::two_encoder_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Reference,
    TwoEncoder,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Reference => "reference",
            Method::TwoEncoder => "two_encoder",
        }
    }
}

/// Method-specific evidence behind one 2β reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReadingDetail {
    ChangePoint {
        start_time: f64,
        breakpoint_time: f64,
        /// Midline slope while crossing the gap (rad/s).
        gap_slope: f64,
        /// Midline slope while dragging the load (rad/s).
        engaged_slope: f64,
    },
    SpeedIntegration {
        apex_time: f64,
        t1: f64,
        t2: f64,
        /// Assumed constant load speed, the motor speed at `t1` (rad/s).
        load_speed: f64,
    },
    Loop {
        /// Load position level at which the loop width was largest (rad).
        x_l: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub interval: usize,
    /// Estimated full gap 2β (rad).
    pub two_beta: f64,
    pub detail: ReadingDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacklashEstimate {
    pub method: Method,
    pub readings: Vec<Reading>,
    pub mean_2beta: f64,
    /// Sample standard deviation; zero for a single reading.
    pub std_2beta: f64,
    pub diagnostics: Vec<String>,
}

impl BacklashEstimate {
    /// Aggregate readings, failing when there are none.
    pub fn from_readings(method: Method, readings: Vec<Reading>, diagnostics: Vec<String>) -> Result<Self> {
        if readings.is_empty() {
            return Err(Error::EstimationFailed {
                reason: format!("{} method produced no accepted readings", method.label()),
                diagnostics,
            });
        }
        let n = readings.len() as f64;
        let mean = readings.iter().map(|r| r.two_beta).sum::<f64>() / n;
        let std = if readings.len() > 1 {
            let ss: f64 = readings.iter().map(|r| (r.two_beta - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            method,
            readings,
            mean_2beta: mean,
            std_2beta: std,
            diagnostics,
        })
    }

    /// Signed relative error of the mean against a true gap `2β`.
    pub fn relative_error(&self, true_two_beta: f64) -> f64 {
        (self.mean_2beta - true_two_beta) / true_two_beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reading(v: f64) -> Reading {
        Reading {
            interval: 0,
            two_beta: v,
            detail: ReadingDetail::Loop { x_l: 0.0 },
        }
    }

    #[test]
    fn aggregate_statistics() {
        let est =
            BacklashEstimate::from_readings(Method::Proposed, vec![reading(1.0), reading(2.0), reading(3.0)], vec![])
                .unwrap();
        assert_eq!(est.mean_2beta, 2.0);
        assert_eq!(est.std_2beta, 1.0);
        assert!((est.relative_error(4.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_readings_fail_with_diagnostics() {
        let err = BacklashEstimate::from_readings(Method::Reference, vec![], vec!["x".into()]).unwrap_err();
        match err {
            Error::EstimationFailed { diagnostics, .. } => assert_eq!(diagnostics, vec!["x"]),
            other => panic!("{other:?}"),
        }
    }
}
