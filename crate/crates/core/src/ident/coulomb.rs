use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    /// Viscous coefficient (N·m·s/rad).
    pub slope: f64,
    /// Torque-axis intercept (N·m).
    pub intercept: f64,
}

/// Per-direction friction lines from steady-velocity torque samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoulombFit {
    pub positive: LineFit,
    pub negative: LineFit,
    /// Mean of both slopes.
    pub viscous: f64,
    /// Symmetric Coulomb level, half the distance between intercepts.
    pub coulomb: f64,
}

/// Ordinary least squares of torque on velocity, separately for each sign
/// of velocity.
pub fn coulomb_identify(samples: &[(f64, f64)]) -> Result<CoulombFit> {
    if let Some(&(v, _)) = samples.iter().find(|(v, t)| !v.is_finite() || !t.is_finite()) {
        return Err(Error::invalid("samples", format!("non-finite sample at v = {v}")));
    }
    if samples.iter().any(|&(v, _)| v == 0.0) {
        return Err(Error::invalid("samples", "zero velocity has no friction sign"));
    }
    let pos: Vec<_> = samples.iter().copied().filter(|&(v, _)| v > 0.0).collect();
    let neg: Vec<_> = samples.iter().copied().filter(|&(v, _)| v < 0.0).collect();
    let positive = ols(&pos, "positive")?;
    let negative = ols(&neg, "negative")?;
    Ok(CoulombFit {
        positive,
        negative,
        viscous: 0.5 * (positive.slope + negative.slope),
        coulomb: 0.5 * (positive.intercept - negative.intercept),
    })
}

fn ols(xy: &[(f64, f64)], side: &str) -> Result<LineFit> {
    let n = xy.len() as f64;
    let xm = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - xm).powi(2)).sum();
    if xy.len() < 2 || sxx.is_nan() || sxx <= 0.0 {
        return Err(Error::RankDeficient(format!(
            "{side} velocities need at least two distinct values"
        )));
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: ym - slope * xm,
    })
}
