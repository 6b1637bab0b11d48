//! Closed-form relay limit-cycle predictions for the motor-velocity loop
//! `m x'' + d x' + f sign(x') = -H[x']`.
//!
//! The printed amplitude and drift formulas come from the approximate phase
//! portrait `x = -m v^2 / (2 (d v + h + f sign v)) + x0`. The `exact_*`
//! functions integrate the true phase portrait of the piecewise-affine
//! dynamics instead; they are used to explain oracle disagreements between
//! the printed forms and simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PlantParams;

/// Below this damping the series limits replace terms divided by `d`.
pub const SMALL_DAMPING: f64 = 1e-9;

/// Outcome of the three limit-cycle existence conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// `e < h / d`
    pub threshold_below_drive: bool,
    /// `h > f`
    pub drive_above_friction: bool,
    /// `e < 2 f / d`
    pub threshold_below_friction: bool,
    pub all: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn check_conditions(plant: &PlantParams, h: f64, e: f64) -> Conditions {
    let d = plant.motor_damping;
    let f = plant.motor_coulomb;
    let (threshold_below_drive, threshold_below_friction, note) = if d > 0.0 {
        (e < h / d, e < 2.0 * f / d, None)
    } else {
        (
            true,
            true,
            Some("d = 0: threshold conditions hold trivially".to_string()),
        )
    };
    let drive_above_friction = h > f;
    Conditions {
        threshold_below_drive,
        drive_above_friction,
        threshold_below_friction,
        all: threshold_below_drive && drive_above_friction && threshold_below_friction,
        note,
    }
}

/// Approximate phase portrait of the half cycle under relay torque `-h`.
pub fn phase_portrait_position(v: f64, plant: &PlantParams, h: f64, x0: f64) -> Result<f64> {
    let m = plant.motor_inertia;
    let d = plant.motor_damping;
    let f = plant.motor_coulomb;
    let den = d * v + h + f * sign0(v);
    if den == 0.0 {
        let stall = if d != 0.0 { -(h + f * sign0(v)) / d } else { f64::NAN };
        return Err(Error::SingularParameters(format!(
            "phase portrait denominator vanishes at stall velocity {stall} rad/s"
        )));
    }
    Ok(-0.5 * m * v * v / den + x0)
}

/// Peak-to-peak motor position of the symmetric limit cycle, X_xi (rad).
pub fn limit_cycle_amplitude(plant: &PlantParams, h: f64, e: f64) -> Result<f64> {
    let m = plant.motor_inertia;
    let d = plant.motor_damping;
    let f = plant.motor_coulomb;
    let den = (f + h + d * e) * (f - h + d * e);
    if den == 0.0 {
        return Err(Error::SingularParameters("(f + h + d e)(f - h + d e) = 0".into()));
    }
    Ok(-e * e * h * m / den)
}

/// Half-period t* of the symmetric limit cycle (s).
pub fn half_period(plant: &PlantParams, h: f64, e: f64) -> Result<f64> {
    crossing_time(plant, h, e)
}

/// Time for the motor velocity to go from `+e` to `-e` under relay torque
/// `-h`; the two logarithms of the half-period formula.
fn crossing_time(plant: &PlantParams, h: f64, e: f64) -> Result<f64> {
    let m = plant.motor_inertia;
    let d = plant.motor_damping;
    let f = plant.motor_coulomb;
    let c1 = h + f;
    let c2 = h - f;
    if !(c1 > 0.0 && c2 > d * e) {
        return Err(Error::ConditionsViolated(format!(
            "logarithm arguments non-positive: need h > f + d e (h = {h}, f = {f}, d e = {})",
            d * e
        )));
    }
    if d.abs() < SMALL_DAMPING {
        return Ok(m * e * (1.0 / c1 + 1.0 / c2));
    }
    // -(m/d) [ln(1 + d e/(f - h)) + ln((f + h)/(f + h + d e))]
    Ok(-(m / d) * ((-d * e / c2).ln_1p() - (d * e / c1).ln_1p()))
}

/// Which printed form of the drift-per-period formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftForm {
    /// Denominator terms `-a^2 h0^2 + d^2 e^2 + 2 d e + f^2`, as printed.
    Printed,
    /// Denominator terms `-a^2 h0^2 + (d e + f)^2`, i.e. `2 d e f` in place
    /// of `2 d e`. Dimensionally consistent.
    CrossTerm,
}

/// Net shift X_C of the drifting limit cycle per period (rad), printed form.
pub fn drift_per_period(plant: &PlantParams, h0: f64, e: f64, alpha_plus: f64, alpha_minus: f64) -> Result<f64> {
    drift_per_period_form(plant, h0, e, alpha_plus, alpha_minus, DriftForm::Printed)
}

pub fn drift_per_period_form(
    plant: &PlantParams,
    h0: f64,
    e: f64,
    alpha_plus: f64,
    alpha_minus: f64,
    form: DriftForm,
) -> Result<f64> {
    let m = plant.motor_inertia;
    let d = plant.motor_damping;
    let f = plant.motor_coulomb;
    let mid = match form {
        DriftForm::Printed => 2.0 * d * e,
        DriftForm::CrossTerm => 2.0 * d * e * f,
    };
    let common = d * d * e * e + mid + f * f;
    let den_minus = -alpha_minus * alpha_minus * h0 * h0 + common;
    let den_plus = -alpha_plus * alpha_plus * h0 * h0 + common;
    if den_minus == 0.0 || den_plus == 0.0 {
        return Err(Error::SingularParameters("drift denominator vanishes".into()));
    }
    let num = -e * e * h0 * h0 * m * (alpha_minus * alpha_minus - alpha_plus * alpha_plus) * (f + d * e);
    Ok(num / (den_minus * den_plus))
}

/// Duration T_C of one drifting period (s).
pub fn drift_period(plant: &PlantParams, h0: f64, e: f64, alpha_plus: f64, alpha_minus: f64) -> Result<f64> {
    Ok(crossing_time(plant, alpha_minus * h0, e)? + crossing_time(plant, alpha_plus * h0, e)?)
}

/// Average drift velocity X_C / T_C (rad/s) from the printed forms.
pub fn drift_velocity(plant: &PlantParams, h0: f64, e: f64, alpha_plus: f64, alpha_minus: f64) -> Result<f64> {
    Ok(drift_per_period(plant, h0, e, alpha_plus, alpha_minus)? / drift_period(plant, h0, e, alpha_plus, alpha_minus)?)
}

/// Load travel after one elastic impact at motor speed `e`, decelerating
/// under `M x'' + D x' + F = 0` from the upper-bound velocity
/// `2 m e / (M + m)`.
pub fn load_displacement_after_impact(plant: &PlantParams, e: f64) -> Result<f64> {
    let (m, big_m) = (plant.motor_inertia, plant.load_inertia);
    let big_d = plant.load_damping;
    let big_f = plant.load_coulomb;
    if big_d <= 0.0 || big_f <= 0.0 {
        return Err(Error::SingularParameters(
            "undamped load: D > 0 and F > 0 required".into(),
        ));
    }
    let v0 = 2.0 * m * e / (big_m + m);
    // (F M / D^2) ln(F (M+m) / (F (M+m) + 2 D e m)) + 2 M e m / (D (M+m))
    // rewritten as (M v0^2 / F) q(D v0 / F) with q(y) = (y - ln(1+y)) / y^2.
    let y = big_d * v0 / big_f;
    Ok(big_m * v0 * v0 / big_f * log_remainder(y))
}

/// Exact half-cycle displacement `x(v = -e) - x(v = +e)` under constant
/// relay torque `-h`, from the true phase portrait.
pub fn exact_half_cycle_displacement(plant: &PlantParams, h: f64, e: f64) -> Result<f64> {
    let (rise, fall) = exact_half_cycle_parts(plant, h, e)?;
    Ok(rise + fall)
}

/// `(x(0) - x(e), x(-e) - x(0))` of the exact half cycle.
fn exact_half_cycle_parts(plant: &PlantParams, h: f64, e: f64) -> Result<(f64, f64)> {
    let m = plant.motor_inertia;
    let d = plant.motor_damping;
    let f = plant.motor_coulomb;
    let c1 = h + f;
    let c2 = h - f;
    if !(c1 > 0.0 && c2 > d * e) {
        return Err(Error::ConditionsViolated(format!(
            "velocity -e unreachable: need h > f + d e (h = {h}, f = {f}, d e = {})",
            d * e
        )));
    }
    // m v dv/dx = -(d v + c): x(v) - x(v0) = -(m/d) [v - v0 - (c/d) ln((d v + c)/(d v0 + c))]
    let rise = m * e * e / c1 * log_remainder(d * e / c1);
    let fall = -m * e * e / c2 * log_remainder(-d * e / c2);
    Ok((rise, fall))
}

/// Exact peak-to-peak amplitude of the symmetric limit cycle (rad).
pub fn exact_limit_cycle_amplitude(plant: &PlantParams, h: f64, e: f64) -> Result<f64> {
    let (rise, fall) = exact_half_cycle_parts(plant, h, e)?;
    Ok(rise - fall)
}

/// Exact net shift per period of the drifting limit cycle (rad).
pub fn exact_drift_per_period(plant: &PlantParams, h0: f64, e: f64, alpha_plus: f64, alpha_minus: f64) -> Result<f64> {
    Ok(exact_half_cycle_displacement(plant, alpha_plus * h0, e)?
        - exact_half_cycle_displacement(plant, alpha_minus * h0, e)?)
}

/// `(y - ln(1 + y)) / y^2`, accurate near `y = 0`.
fn log_remainder(y: f64) -> f64 {
    if y.abs() < 1e-3 {
        // 1/2 - y/3 + y^2/4 - y^3/5 + y^4/6
        0.5 + y * (-1.0 / 3.0 + y * (0.25 + y * (-0.2 + y / 6.0)))
    } else {
        (y - y.ln_1p()) / (y * y)
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// All closed-form predictions for one relay setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayPredictions {
    pub h0: f64,
    pub e: f64,
    pub conditions: Conditions,
    pub amplitude: Option<f64>,
    pub amplitude_exact: Option<f64>,
    pub half_period: Option<f64>,
    pub drift: Vec<DriftPrediction>,
    pub load_displacement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPrediction {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub drift_printed: Option<f64>,
    pub drift_cross_term: Option<f64>,
    pub drift_exact: Option<f64>,
    pub period: Option<f64>,
}

impl DriftPrediction {
    pub fn evaluate(plant: &PlantParams, h0: f64, e: f64, alpha_plus: f64, alpha_minus: f64) -> Self {
        Self {
            alpha_plus,
            alpha_minus,
            drift_printed: drift_per_period(plant, h0, e, alpha_plus, alpha_minus).ok(),
            drift_cross_term: drift_per_period_form(plant, h0, e, alpha_plus, alpha_minus, DriftForm::CrossTerm).ok(),
            drift_exact: exact_drift_per_period(plant, h0, e, alpha_plus, alpha_minus).ok(),
            period: drift_period(plant, h0, e, alpha_plus, alpha_minus).ok(),
        }
    }
}

impl RelayPredictions {
    /// Predictions for base amplitude `h0` and every distinct asymmetry
    /// pair of the schedule.
    pub fn evaluate(plant: &PlantParams, h0: f64, e: f64, pairs: &[(f64, f64)]) -> Self {
        let mut drift: Vec<DriftPrediction> = Vec::new();
        for &(ap, am) in pairs {
            if ap == am || drift.iter().any(|p| p.alpha_plus == ap && p.alpha_minus == am) {
                continue;
            }
            drift.push(DriftPrediction::evaluate(plant, h0, e, ap, am));
        }
        Self {
            h0,
            e,
            conditions: check_conditions(plant, h0, e),
            amplitude: limit_cycle_amplitude(plant, h0, e).ok(),
            amplitude_exact: exact_limit_cycle_amplitude(plant, h0, e).ok(),
            half_period: half_period(plant, h0, e).ok(),
            drift,
            load_displacement: load_displacement_after_impact(plant, e).ok(),
        }
    }
}
