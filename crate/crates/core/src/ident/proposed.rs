use serde::{Deserialize, Serialize};

use super::{fit_two_lines, BacklashEstimate, Method, Reading, ReadingDetail};
use crate::analytics;
use crate::error::{Error, Result};
use crate::model::{PlantParams, RelayConfig};
use crate::sim::MotorTrace;

/// Which drift directions contribute readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionFilter {
    #[default]
    Both,
    Positive,
    Negative,
}

impl DirectionFilter {
    fn admits(self, slope: f64) -> bool {
        match self {
            DirectionFilter::Both => true,
            DirectionFilter::Positive => slope > 0.0,
            DirectionFilter::Negative => slope < 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposedOptions {
    /// Minimum ratio of gap to engaged midline slope.
    pub slope_ratio_min: f64,
    pub direction: DirectionFilter,
    /// Subtract the symmetric limit-cycle amplitude from each reading.
    pub amplitude_correction: bool,
    /// Smoothing window (s); defaults to the predicted drift period.
    pub window: Option<f64>,
    /// Minimum share of a segment on either side of the breakpoint.
    pub min_side_fraction: f64,
}

impl Default for ProposedOptions {
    fn default() -> Self {
        Self {
            slope_ratio_min: 2.0,
            direction: DirectionFilter::Both,
            amplitude_correction: false,
            window: None,
            min_side_fraction: 0.02,
        }
    }
}

/// Centered moving average of odd width; the window shrinks
/// symmetrically near the ends.
pub fn moving_average(y: &[f64], width: usize) -> Vec<f64> {
    let r = width.max(1) / 2;
    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in y {
        acc += v;
        prefix.push(acc);
    }
    let n = y.len();
    (0..n)
        .map(|k| {
            let h = r.min(k).min(n - 1 - k);
            (prefix[k + h + 1] - prefix[k - h]) / (2 * h + 1) as f64
        })
        .collect()
}

/// Smoothing window: one predicted drift period, else two half-periods.
fn default_window(plant: &PlantParams, relay: &RelayConfig) -> Result<f64> {
    let pair = relay
        .schedule
        .iter()
        .find(|s| s.alpha_plus != s.alpha_minus)
        .map(|s| (s.alpha_plus, s.alpha_minus));
    if let Some((ap, am)) = pair {
        if let Ok(tc) = analytics::drift_period(plant, relay.h0, relay.e, ap, am) {
            return Ok(tc);
        }
    }
    analytics::half_period(plant, relay.h0, relay.e)
        .map(|t| 2.0 * t)
        .map_err(|e| Error::Config(format!("no analytic cycle period for the smoothing window: {e}")))
}

/// Read 2β from the slope break of the drifting motor-position midline in
/// every complete relay schedule segment.
pub fn propose_identify(
    trace: &MotorTrace,
    relay: &RelayConfig,
    plant: &PlantParams,
    opts: &ProposedOptions,
) -> Result<BacklashEstimate> {
    if trace.len() < 2 {
        return Err(Error::EstimationFailed {
            reason: "trace too short".into(),
            diagnostics: vec![],
        });
    }
    let ts = trace.sample_period;
    let window = match opts.window {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => {
            return Err(Error::invalid(
                "identification.options.window",
                format!("{w} is not positive"),
            ))
        }
        None => default_window(plant, relay)?,
    };
    let mut width = ((window / ts).round() as usize).max(1);
    if width % 2 == 0 {
        width += 1;
    }
    let correction = if opts.amplitude_correction {
        analytics::limit_cycle_amplitude(plant, relay.h0, relay.e)?
    } else {
        0.0
    };

    // Only intervals opened by a flip count: before the first flip the
    // starting position inside the gap is unknown.
    let t_first = trace.t[0];
    let t_last = trace.t[trace.len() - 1];
    let bounds: Vec<usize> = trace
        .schedule_flips
        .iter()
        .filter(|&&tf| tf > t_first + 0.5 * ts && tf <= t_last + 0.5 * ts)
        .map(|&tf| trace.index_at(tf).min(trace.len() - 1))
        .collect();
    let segments: Vec<(usize, usize)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    if segments.len() < 2 {
        return Err(Error::EstimationFailed {
            reason: format!(
                "need at least 2 complete schedule segments between flips, found {}",
                segments.len()
            ),
            diagnostics: vec![],
        });
    }

    let mut readings = Vec::new();
    let mut diagnostics = Vec::new();
    for (j, &(lo, hi)) in segments.iter().enumerate() {
        let i = j + 1;
        let n = hi - lo;
        if width > n {
            return Err(Error::Config(format!(
                "smoothing window of {width} samples exceeds segment {i} ({n} samples)"
            )));
        }
        let t = &trace.t[lo..hi];
        let mid = moving_average(&trace.x_m[lo..hi], width);
        let min_side = width.max((opts.min_side_fraction * n as f64).ceil() as usize).max(3);
        let Some(fit) = fit_two_lines(t, &mid, min_side) else {
            diagnostics.push(format!("segment {i}: too short for a change-point fit"));
            continue;
        };
        let (gap, engaged) = (fit.left_slope, fit.right_slope);
        if !(gap.abs() >= opts.slope_ratio_min * engaged.abs() && gap != 0.0) {
            diagnostics.push(format!(
                "segment {i}: no change point (gap slope {gap:.4e}, engaged slope {engaged:.4e} rad/s, ratio below {})",
                opts.slope_ratio_min
            ));
            continue;
        }
        if !opts.direction.admits(gap) {
            diagnostics.push(format!("segment {i}: skipped by direction filter"));
            continue;
        }
        let (t_start, t_bp) = (t[0], t[fit.breakpoint]);
        let two_beta = (fit.left_at(t_bp) - fit.left_at(t_start)).abs() - correction;
        readings.push(Reading {
            interval: i,
            two_beta,
            detail: ReadingDetail::ChangePoint {
                start_time: t_start,
                breakpoint_time: t_bp,
                gap_slope: gap,
                engaged_slope: engaged,
            },
        });
    }
    BacklashEstimate::from_readings(Method::Proposed, readings, diagnostics)
}
