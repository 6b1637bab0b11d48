use serde::{Deserialize, Serialize};

/// Best two-segment least-squares line fit of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePointFit {
    /// First sample index of the right segment.
    pub breakpoint: usize,
    pub left_slope: f64,
    pub left_intercept: f64,
    pub right_slope: f64,
    pub right_intercept: f64,
    /// Combined residual sum of squares of both segments.
    pub sse: f64,
    /// Residual sum of squares of a single line through all samples.
    pub single_sse: f64,
}

impl ChangePointFit {
    pub fn left_at(&self, t: f64) -> f64 {
        self.left_intercept + self.left_slope * t
    }

    pub fn right_at(&self, t: f64) -> f64 {
        self.right_intercept + self.right_slope * t
    }
}

/// Running sums for O(1) least-squares on any sample range.
struct Prefix {
    t0: f64,
    y0: f64,
    s_t: Vec<f64>,
    s_y: Vec<f64>,
    s_tt: Vec<f64>,
    s_ty: Vec<f64>,
    s_yy: Vec<f64>,
}

struct Line {
    slope: f64,
    intercept: f64,
    sse: f64,
}

impl Prefix {
    fn new(t: &[f64], y: &[f64]) -> Self {
        // Shift to the first sample to limit cancellation in the sums.
        let (t0, y0) = (t[0], y[0]);
        let n = t.len();
        let mut p = Prefix {
            t0,
            y0,
            s_t: Vec::with_capacity(n + 1),
            s_y: Vec::with_capacity(n + 1),
            s_tt: Vec::with_capacity(n + 1),
            s_ty: Vec::with_capacity(n + 1),
            s_yy: Vec::with_capacity(n + 1),
        };
        let (mut a, mut b, mut c, mut d, mut e) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for v in [&mut p.s_t, &mut p.s_y, &mut p.s_tt, &mut p.s_ty, &mut p.s_yy] {
            v.push(0.0);
        }
        for (&ti, &yi) in t.iter().zip(y) {
            let (u, w) = (ti - t0, yi - y0);
            a += u;
            b += w;
            c += u * u;
            d += u * w;
            e += w * w;
            p.s_t.push(a);
            p.s_y.push(b);
            p.s_tt.push(c);
            p.s_ty.push(d);
            p.s_yy.push(e);
        }
        p
    }

    /// Least-squares line over samples `lo..hi` (at least two distinct times).
    fn line(&self, lo: usize, hi: usize) -> Line {
        let n = (hi - lo) as f64;
        let st = self.s_t[hi] - self.s_t[lo];
        let sy = self.s_y[hi] - self.s_y[lo];
        let stt = self.s_tt[hi] - self.s_tt[lo] - st * st / n;
        let sty = self.s_ty[hi] - self.s_ty[lo] - st * sy / n;
        let syy = self.s_yy[hi] - self.s_yy[lo] - sy * sy / n;
        let slope = if stt > 0.0 { sty / stt } else { 0.0 };
        let sse = (syy - slope * sty).max(0.0);
        // Mean point in shifted coordinates, then undo the shift.
        let (tm, ym) = (st / n + self.t0, sy / n + self.y0);
        Line {
            slope,
            intercept: ym - slope * tm,
            sse,
        }
    }
}

/// Exhaustive search over all breakpoints leaving at least `min_side`
/// samples on each side. Returns `None` when the series is too short.
pub fn fit_two_lines(t: &[f64], y: &[f64], min_side: usize) -> Option<ChangePointFit> {
    assert_eq!(t.len(), y.len(), "time and value series differ in length");
    let min_side = min_side.max(2);
    let n = t.len();
    if n < 2 * min_side {
        return None;
    }
    let p = Prefix::new(t, y);
    let single = p.line(0, n);
    let mut best: Option<(usize, f64)> = None;
    for k in min_side..=n - min_side {
        let sse = p.line(0, k).sse + p.line(k, n).sse;
        if best.map_or(true, |(_, b)| sse < b) {
            best = Some((k, sse));
        }
    }
    let (k, sse) = best?;
    let (l, r) = (p.line(0, k), p.line(k, n));
    Some(ChangePointFit {
        breakpoint: k,
        left_slope: l.slope,
        left_intercept: l.intercept,
        right_slope: r.slope,
        right_intercept: r.intercept,
        sse: sse.min(single.sse),
        single_sse: single.sse,
    })
}
