use serde::{Deserialize, Serialize};

use super::{BacklashEstimate, Method, Reading, ReadingDetail};
use crate::control::TriangleRef;
use crate::error::Result;
use crate::sim::MotorTrace;

/// How the re-contact instant t2 is located after each apex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ImpactDetector {
    /// Sample of largest discrete jerk magnitude in the post-apex half
    /// period; it must exceed `ratio_min` times the median magnitude there.
    Jerk { ratio_min: f64 },
    /// First known impact after t1; validates the jerk detector.
    GroundTruth { impact_times: Vec<f64> },
}

impl Default for ImpactDetector {
    fn default() -> Self {
        ImpactDetector::Jerk { ratio_min: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceOptions {
    pub detector: ImpactDetector,
}

/// Speed-integration estimate: after every reference apex the load is
/// assumed to keep the motor speed at decoupling, and the motor's lag
/// behind it until re-contact is summed up.
pub fn reference_identify(
    trace: &MotorTrace,
    reference: &TriangleRef,
    opts: &ReferenceOptions,
) -> Result<BacklashEstimate> {
    reference.validate()?;
    let n = trace.len();
    let mut readings = Vec::new();
    let mut diagnostics = Vec::new();
    if n < 3 {
        diagnostics.push("trace too short".into());
        return BacklashEstimate::from_readings(Method::Reference, readings, diagnostics);
    }
    let ts = trace.sample_period;
    let v = &trace.v_m;
    let mut acc = vec![0.0; n];
    for k in 1..n {
        acc[k] = (v[k] - v[k - 1]) / ts;
    }
    let mut jerk = vec![0.0; n];
    for k in 2..n {
        jerk[k] = (acc[k] - acc[k - 1]) / ts;
    }

    let (t_first, t_last) = (trace.t[0], trace.t[n - 1]);
    let quarter = reference.period / 4.0;
    let half = reference.period / 2.0;
    let lookback = ((quarter / 2.0 / ts).round() as usize).max(1);
    for (i, &apex) in reference.apex_times(t_last).iter().enumerate() {
        if apex - quarter < t_first || apex + half > t_last + 0.5 * ts {
            continue;
        }
        let ka = trace.index_at(apex);
        let kend = trace.index_at(apex + half).min(n - 1);
        let pre: f64 = acc[ka.saturating_sub(lookback).max(1)..ka].iter().sum();
        if pre == 0.0 {
            diagnostics.push(format!("apex {i}: no pre-apex acceleration"));
            continue;
        }
        let Some(k1) = (ka.max(1)..=kend).find(|&k| acc[k] * pre < 0.0) else {
            diagnostics.push(format!("apex {i}: motor acceleration never reverses"));
            continue;
        };
        let k2 = match &opts.detector {
            ImpactDetector::Jerk { ratio_min } => {
                if k1 + 1 > kend {
                    diagnostics.push(format!("apex {i}: empty post-decoupling window"));
                    continue;
                }
                let window = &jerk[k1 + 1..=kend];
                let (off, peak) = window
                    .iter()
                    .map(|j| j.abs())
                    .enumerate()
                    .fold((0, 0.0), |best, (k, j)| if j > best.1 { (k, j) } else { best });
                let mut mags: Vec<f64> = window.iter().map(|j| j.abs()).collect();
                mags.sort_by(f64::total_cmp);
                let median = mags[mags.len() / 2];
                if !(peak > 0.0 && peak >= ratio_min * median) {
                    diagnostics.push(format!(
                        "apex {i}: no impact signature (peak jerk {peak:.3e}, median {median:.3e})"
                    ));
                    continue;
                }
                k1 + 1 + off
            }
            ImpactDetector::GroundTruth { impact_times } => {
                let t1 = trace.t[k1];
                match impact_times.iter().find(|&&ti| ti > t1 && ti <= apex + half) {
                    Some(&ti) => trace.index_at(ti).min(n - 1),
                    None => {
                        diagnostics.push(format!("apex {i}: no recorded impact after t1"));
                        continue;
                    }
                }
            }
        };
        if k2 <= k1 {
            diagnostics.push(format!("apex {i}: t2 not after t1, rejected"));
            continue;
        }
        let load_speed = v[k1];
        let lag: f64 = v[k1..=k2].iter().map(|&vm| load_speed - vm).sum();
        readings.push(Reading {
            interval: i,
            two_beta: ts * lag.abs(),
            detail: ReadingDetail::SpeedIntegration {
                apex_time: apex,
                t1: trace.t[k1],
                t2: trace.t[k2],
                load_speed,
            },
        });
    }
    BacklashEstimate::from_readings(Method::Reference, readings, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_from(v: Vec<f64>, ts: f64) -> MotorTrace {
        let n = v.len();
        MotorTrace {
            sample_period: ts,
            t: (0..n).map(|k| k as f64 * ts).collect(),
            x_m: vec![0.0; n],
            v_m: v,
            schedule_flips: vec![],
        }
    }

    /// Motor follows the triangle, but after each apex it falls behind
    /// linearly up to `jump` over `hold` samples and snaps back at
    /// re-contact, mimicking a gap crossing.
    fn synthetic(jump: f64, hold: usize) -> (MotorTrace, TriangleRef) {
        let tri = TriangleRef {
            slope: 100.0,
            period: 0.2,
        };
        let ts = 1e-3;
        let n = 601;
        let mut v: Vec<f64> = (0..n)
            .map(|k| crate::control::triangle_velocity_ref(k as f64 * ts, &tri))
            .collect();
        for apex in tri.apex_times(0.6) {
            let ka = (apex / ts).round() as usize + 1;
            let end = (ka + hold).min(n);
            for (i, vk) in v[ka.min(end)..end].iter_mut().enumerate() {
                *vk -= jump * (i + 1) as f64 / hold as f64 * apex_sign(apex, &tri);
            }
        }
        (trace_from(v, ts), tri)
    }

    fn apex_sign(apex: f64, tri: &TriangleRef) -> f64 {
        crate::control::triangle_velocity_ref(apex, tri).signum()
    }

    #[test]
    fn zero_integrand_gives_zero() {
        let (mut trace, tri) = synthetic(0.0, 0);
        // Flat motor speed after each apex: v_m equals v_m(t1).
        for k in 0..trace.len() {
            let t = trace.t[k];
            if (t - 0.05) > 0.0 && t < 0.15 {
                trace.v_m[k] = trace.v_m[51];
            }
        }
        let opts = ReferenceOptions {
            detector: ImpactDetector::GroundTruth {
                impact_times: vec![0.1],
            },
        };
        let est = reference_identify(&trace, &tri, &opts).unwrap();
        assert_eq!(est.readings.len(), 1);
        assert_eq!(est.readings[0].two_beta, 0.0);
    }

    #[test]
    fn mirror_symmetric() {
        let (trace, tri) = synthetic(2.0, 20);
        let mut mirrored = trace.clone();
        for v in &mut mirrored.v_m {
            *v = -*v;
        }
        let opts = ReferenceOptions::default();
        let a = reference_identify(&trace, &tri, &opts).unwrap();
        let b = reference_identify(&mirrored, &tri, &opts).unwrap();
        assert_eq!(a.readings.len(), b.readings.len());
        for (x, y) in a.readings.iter().zip(&b.readings) {
            assert!((x.two_beta - y.two_beta).abs() < 1e-12);
        }
    }

    #[test]
    fn jerk_detector_finds_recontact() {
        let (trace, tri) = synthetic(2.0, 20);
        let est = reference_identify(&trace, &tri, &ReferenceOptions::default()).unwrap();
        assert!(!est.readings.is_empty(), "{:?}", est.diagnostics);
        for r in &est.readings {
            let ReadingDetail::SpeedIntegration { apex_time, t2, .. } = r.detail else {
                panic!()
            };
            let offset = t2 - apex_time;
            assert!(offset > 0.015 && offset < 0.025, "{offset}");
            assert!(r.two_beta > 0.0);
        }
    }

    #[test]
    fn smooth_trace_has_no_impact_signature() {
        let tri = TriangleRef {
            slope: 100.0,
            period: 0.2,
        };
        let ts = 1e-3;
        let v: Vec<f64> = (0..601)
            .map(|k| 5.0 * (2.0 * std::f64::consts::PI * k as f64 * ts / 0.2).sin())
            .collect();
        assert!(reference_identify(&trace_from(v, ts), &tri, &ReferenceOptions::default()).is_err());
    }
}
