use super::{BacklashEstimate, Method, Reading, ReadingDetail};
use crate::error::{Error, Result};
use crate::sim::Trajectory;

const LEVELS: usize = 64;

/// Width of the (x_m, x_L) play loop from both encoders: at each load
/// position level, the motor lead on the rising branch minus its lead on
/// the falling branch; the widest level wins. Validation only.
pub fn two_encoder_map(traj: &Trajectory) -> Result<BacklashEstimate> {
    let fail = |reason: &str| Error::EstimationFailed {
        reason: reason.to_string(),
        diagnostics: vec![],
    };
    let n = traj.len();
    if n < 2 {
        return Err(fail("trajectory too short"));
    }
    let steps = traj.x_l.windows(2).map(|w| w[1] - w[0]);
    let (mut up, mut down) = (false, false);
    for s in steps {
        up |= s > 0.0;
        down |= s < 0.0;
    }
    if !(up && down) {
        return Err(fail("loop not closed: load never moves in both directions"));
    }
    let lo = traj.x_l.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = traj.x_l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let bin = |x: f64| (((x - lo) / span * LEVELS as f64) as usize).min(LEVELS - 1);

    let mut rising = [f64::NEG_INFINITY; LEVELS];
    let mut falling = [f64::INFINITY; LEVELS];
    for k in 0..n {
        let delta = traj.x_m[k] - traj.x_l[k];
        let b = bin(traj.x_l[k]);
        if traj.v_m[k] > 0.0 {
            rising[b] = rising[b].max(delta);
        } else if traj.v_m[k] < 0.0 {
            falling[b] = falling[b].min(delta);
        }
    }
    let best = (0..LEVELS)
        .filter(|&b| rising[b].is_finite() && falling[b].is_finite())
        .map(|b| (b, rising[b] - falling[b]))
        .fold(None, |acc: Option<(usize, f64)>, c| match acc {
            Some(a) if a.1 >= c.1 => Some(a),
            _ => Some(c),
        });
    let Some((b, width)) = best else {
        return Err(fail("loop not closed: no load level visited on both branches"));
    };
    let reading = Reading {
        interval: 0,
        two_beta: width.max(0.0),
        detail: ReadingDetail::Loop {
            x_l: lo + (b as f64 + 0.5) * span / LEVELS as f64,
        },
    };
    BacklashEstimate::from_readings(Method::TwoEncoder, vec![reading], vec![])
}
